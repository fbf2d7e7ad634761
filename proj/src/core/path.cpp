#include "httptpc/core/path.hpp"

#include <algorithm>

#include "httptpc/core/error.hpp"

namespace httptpc {

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  const auto n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= n) return false;
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((extra == 1 && cp < 0x80) || (extra == 2 && cp < 0x800) ||
        (extra == 3 && cp < 0x10000) || cp > 0x10FFFF ||
        (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

VirtualPath VirtualPath::normalize(std::string_view raw) {
  if (!is_valid_utf8(raw)) {
    throw TpcException(ErrorKind::kBadRequest, "path is not valid UTF-8");
  }
  if (raw.find('\0') != std::string_view::npos) {
    throw TpcException(ErrorKind::kBadRequest, "path contains NUL");
  }
  VirtualPath out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto next = raw.find('/', pos);
    if (next == std::string_view::npos) next = raw.size();
    const auto segment = raw.substr(pos, next - pos);
    if (segment.empty() || segment == ".") {
      // collapse
    } else if (segment == "..") {
      if (out.segments_.empty()) {
        throw TpcException(ErrorKind::kBadRequest,
                           "path ascends above root: " + std::string(raw));
      }
      out.segments_.pop_back();
    } else {
      out.segments_.emplace_back(segment);
    }
    pos = next + 1;
  }
  return out;
}

std::string VirtualPath::str() const {
  if (segments_.empty()) return "/";
  std::string out;
  for (const auto& s : segments_) {
    out += '/';
    out += s;
  }
  return out;
}

std::string_view VirtualPath::name() const noexcept {
  if (segments_.empty()) return {};
  return segments_.back();
}

VirtualPath VirtualPath::parent() const {
  VirtualPath out = *this;
  if (!out.segments_.empty()) out.segments_.pop_back();
  return out;
}

VirtualPath VirtualPath::child(std::string_view segment) const {
  if (segment.empty() || segment == "." || segment == ".." ||
      segment.find('/') != std::string_view::npos ||
      segment.find('\0') != std::string_view::npos ||
      !is_valid_utf8(segment)) {
    throw TpcException(ErrorKind::kBadRequest,
                       "invalid path segment: " + std::string(segment));
  }
  VirtualPath out = *this;
  out.segments_.emplace_back(segment);
  return out;
}

bool VirtualPath::contains(const VirtualPath& candidate) const noexcept {
  if (segments_.size() > candidate.segments_.size()) return false;
  return std::equal(segments_.begin(), segments_.end(),
                    candidate.segments_.begin());
}

namespace {

int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

bool is_unreserved(unsigned char c) noexcept {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
         (c >= '0' && c <= '9') || c == '-' || c == '.' || c == '_' ||
         c == '~' || c == ':' || c == '@' || c == '!' || c == '$' ||
         c == '&' || c == '\'' || c == '(' || c == ')' || c == '*' ||
         c == '+' || c == ',' || c == ';' || c == '=';
}

}  // namespace

std::string percent_decode(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '%') {
      out += text[i];
      continue;
    }
    if (i + 2 >= text.size()) {
      throw TpcException(ErrorKind::kBadRequest, "truncated percent escape");
    }
    const int hi = hex_value(text[i + 1]);
    const int lo = hex_value(text[i + 2]);
    if (hi < 0 || lo < 0) {
      throw TpcException(ErrorKind::kBadRequest, "invalid percent escape");
    }
    out += static_cast<char>(hi * 16 + lo);
    i += 2;
  }
  return out;
}

std::string percent_encode_path(const VirtualPath& path) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  if (path.is_root()) return "/";
  std::string out;
  for (const auto& segment : path.segments()) {
    out += '/';
    for (unsigned char c : segment) {
      if (is_unreserved(c)) {
        out += static_cast<char>(c);
      } else {
        out += '%';
        out += kHex[c >> 4];
        out += kHex[c & 0xF];
      }
    }
  }
  return out;
}

}  // namespace httptpc
