#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

namespace httptpc {

/// Normalized absolute namespace path. Segments are never empty, never
/// "." or "..", and never contain '/' or NUL; the canonical text form is
/// "/" + segments joined by "/" (root is "/").
class VirtualPath {
 public:
  VirtualPath() = default;

  /// Resolves "." and "..", collapses duplicate slashes and validates
  /// UTF-8. Throws TpcException(kBadRequest) on escape above root, NUL,
  /// or malformed UTF-8. Relative input is resolved against root.
  static VirtualPath normalize(std::string_view raw);

  const std::vector<std::string>& segments() const noexcept { return segments_; }
  bool is_root() const noexcept { return segments_.empty(); }
  std::string str() const;

  /// Last segment; empty for root.
  std::string_view name() const noexcept;
  VirtualPath parent() const;
  VirtualPath child(std::string_view segment) const;

  /// Segment-wise containment: true iff `candidate` equals this path or
  /// lies below it.
  bool contains(const VirtualPath& candidate) const noexcept;

  friend auto operator<=>(const VirtualPath&, const VirtualPath&) = default;
  friend bool operator==(const VirtualPath&, const VirtualPath&) = default;

 private:
  std::vector<std::string> segments_;
};

inline VirtualPath normalize_path(std::string_view raw) {
  return VirtualPath::normalize(raw);
}

inline bool path_contains(const VirtualPath& prefix,
                          const VirtualPath& candidate) noexcept {
  return prefix.contains(candidate);
}

bool is_valid_utf8(std::string_view text) noexcept;

/// Decodes %XX escapes exactly once. Throws kBadRequest on a truncated or
/// non-hex escape.
std::string percent_decode(std::string_view text);

/// Percent-encodes each segment so the result can be placed in a URL.
std::string percent_encode_path(const VirtualPath& path);

}  // namespace httptpc
