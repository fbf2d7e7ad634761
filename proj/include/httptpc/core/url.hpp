#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "httptpc/core/path.hpp"

namespace httptpc {

/// Absolute http(s) URL split into the pieces the transfer code needs.
struct Url {
  std::string scheme;  // lowercase
  std::string host;    // without IPv6 brackets
  std::uint16_t port = 0;
  std::string path = "/";  // raw (still percent-encoded)
  std::string query;       // without '?'

  /// Throws TpcException(kBadRequest) for anything that is not an absolute
  /// http:// or https:// URL.
  static Url parse(std::string_view text);

  /// "scheme://host:port"
  std::string origin() const;
  /// path plus "?query" when present
  std::string target() const;
  std::string str() const { return origin() + target(); }

  /// Decoded and normalized namespace path.
  VirtualPath virtual_path() const;

  /// Same origin, path replaced by `path` (query dropped).
  Url with_path(const VirtualPath& path) const;
};

/// Joins an endpoint base URL and a namespace path.
std::string join_url(std::string_view base_url, const VirtualPath& path);

}  // namespace httptpc
