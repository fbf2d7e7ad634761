#include "httptpc/core/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "httptpc/core/error.hpp"

namespace httptpc {

Url Url::parse(std::string_view text) {
  const auto fail = [&](const char* why) -> Url {
    throw TpcException(ErrorKind::kBadRequest,
                       std::string(why) + ": '" + std::string(text) + "'");
  };
  const auto sep = text.find("://");
  if (sep == std::string_view::npos) return fail("not an absolute URL");
  Url url;
  url.scheme.assign(text.substr(0, sep));
  std::transform(url.scheme.begin(), url.scheme.end(), url.scheme.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (url.scheme != "https" && url.scheme != "http") return fail("unsupported URL scheme");
  auto rest = text.substr(sep + 3);
  const auto path_start = rest.find_first_of("/?");
  auto authority = rest.substr(0, path_start);
  if (authority.find('@') != std::string_view::npos) return fail("userinfo not supported");
  std::string_view port_text;
  if (!authority.empty() && authority.front() == '[') {
    const auto close = authority.find(']');
    if (close == std::string_view::npos) return fail("unterminated IPv6 literal");
    url.host.assign(authority.substr(1, close - 1));
    auto after = authority.substr(close + 1);
    if (!after.empty()) {
      if (after.front() != ':') return fail("malformed authority");
      port_text = after.substr(1);
    }
  } else {
    const auto colon = authority.rfind(':');
    url.host.assign(authority.substr(0, colon));
    if (colon != std::string_view::npos) port_text = authority.substr(colon + 1);
  }
  if (url.host.empty()) return fail("URL has no host");
  if (port_text.empty()) {
    url.port = url.scheme == "https" ? 443 : 80;
  } else {
    unsigned value = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), value);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || value == 0 ||
        value > 65535) {
      return fail("invalid port");
    }
    url.port = static_cast<std::uint16_t>(value);
  }
  if (path_start != std::string_view::npos) {
    auto tail = rest.substr(path_start);
    const auto q = tail.find('?');
    url.path.assign(tail.substr(0, q));
    if (url.path.empty()) url.path = "/";
    if (q != std::string_view::npos) url.query.assign(tail.substr(q + 1));
    const auto frag = url.query.find('#');
    if (frag != std::string::npos) url.query.erase(frag);
  }
  return url;
}

std::string Url::origin() const {
  std::string out = scheme + "://";
  if (host.find(':') != std::string::npos) {
    out += '[' + host + ']';
  } else {
    out += host;
  }
  out += ':' + std::to_string(port);
  return out;
}

std::string Url::target() const {
  return query.empty() ? path : path + "?" + query;
}

VirtualPath Url::virtual_path() const {
  return VirtualPath::normalize(percent_decode(path));
}

Url Url::with_path(const VirtualPath& p) const {
  Url out = *this;
  out.path = percent_encode_path(p);
  out.query.clear();
  return out;
}

std::string join_url(std::string_view base_url, const VirtualPath& path) {
  std::string base{base_url};
  while (!base.empty() && base.back() == '/') base.pop_back();
  return base + percent_encode_path(path);
}

}  // namespace httptpc
