#include "httptpc/core/encoding.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <stdexcept>

#include "httptpc/core/error.hpp"

namespace httptpc {

Sha256::Sha256() : ctx_(EVP_MD_CTX_new()) {
  if (ctx_ == nullptr ||
      EVP_DigestInit_ex(static_cast<EVP_MD_CTX*>(ctx_), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("EVP_DigestInit_ex failed");
  }
}

Sha256::~Sha256() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX*>(ctx_)); }

void Sha256::update(std::span<const std::uint8_t> data) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
}

void Sha256::update(std::string_view data) {
  EVP_DigestUpdate(static_cast<EVP_MD_CTX*>(ctx_), data.data(), data.size());
}

Sha256Digest Sha256::finish() {
  Sha256Digest out{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(static_cast<EVP_MD_CTX*>(ctx_), out.data(), &len);
  return out;
}

Sha256Digest sha256(std::string_view data) {
  Sha256 h;
  h.update(data);
  return h.finish();
}

Sha256Digest hmac_sha256(std::span<const std::uint8_t> key, std::string_view message) {
  Sha256Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()),
       reinterpret_cast<const unsigned char*>(message.data()), message.size(), out.data(),
       &len);
  return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out += kHex[b >> 4];
    out += kHex[b & 0xF];
  }
  return out;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) throw TpcException(ErrorKind::kBadRequest, "odd-length hex");
  std::vector<std::uint8_t> out;
  out.reserve(hex.size() / 2);
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    const int hi = nibble(hex[i]);
    const int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) throw TpcException(ErrorKind::kBadRequest, "invalid hex");
    out.push_back(static_cast<std::uint8_t>(hi * 16 + lo));
  }
  return out;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string base64_encode(std::string_view bytes) {
  return base64_encode(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()),
                                 bytes.size()));
}

std::string base64url_encode(std::string_view bytes) {
  auto out = base64_encode(bytes);
  while (!out.empty() && out.back() == '=') out.pop_back();
  for (auto& c : out) {
    if (c == '+') c = '-';
    else if (c == '/') c = '_';
  }
  return out;
}

std::string base64_decode(std::string_view text) {
  std::string padded{text};
  if (padded.find_first_not_of(
          "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/=") !=
      std::string::npos) {
    throw TpcException(ErrorKind::kBadRequest, "invalid base64 character");
  }
  const auto eq = padded.find('=');
  if (eq != std::string::npos && padded.find_first_not_of('=', eq) != std::string::npos) {
    throw TpcException(ErrorKind::kBadRequest, "misplaced base64 padding");
  }
  std::size_t unpadded = eq == std::string::npos ? padded.size() : eq;
  if (unpadded % 4 == 1) throw TpcException(ErrorKind::kBadRequest, "truncated base64");
  padded.resize(unpadded);
  while (padded.size() % 4 != 0) padded += '=';
  std::string out(padded.size() / 4 * 3, '\0');
  const int n = EVP_DecodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                                reinterpret_cast<const unsigned char*>(padded.data()),
                                static_cast<int>(padded.size()));
  if (n < 0) throw TpcException(ErrorKind::kBadRequest, "invalid base64");
  // EVP_DecodeBlock does not strip the bytes contributed by padding.
  std::size_t pad = padded.size() - unpadded;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

std::string base64url_decode(std::string_view text) {
  std::string std_text{text};
  if (std_text.find_first_of("+/=") != std::string::npos) {
    throw TpcException(ErrorKind::kBadRequest, "invalid base64url character");
  }
  for (auto& c : std_text) {
    if (c == '-') c = '+';
    else if (c == '_') c = '/';
  }
  return base64_decode(std_text);
}

std::string digest_header_value(const Sha256Digest& digest) {
  return "sha-256=" + base64_encode(std::span<const std::uint8_t>(digest));
}

std::string sha256_hex_from_digest_header(std::string_view header) {
  // Digest: sha-256=<b64>[, other=...]
  std::size_t pos = 0;
  while (pos < header.size()) {
    auto end = header.find(',', pos);
    if (end == std::string_view::npos) end = header.size();
    auto item = header.substr(pos, end - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    const auto eq = item.find('=');
    if (eq != std::string_view::npos) {
      std::string algo{item.substr(0, eq)};
      std::transform(algo.begin(), algo.end(), algo.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      if (algo == "sha-256") {
        try {
          const auto raw = base64_decode(item.substr(eq + 1));
          if (raw.size() != 32) return {};
          return to_hex(std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()));
        } catch (const TpcException&) {
          return {};
        }
      }
    }
    pos = end + 1;
  }
  return {};
}

}  // namespace httptpc
