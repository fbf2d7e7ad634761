#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace httptpc {

using Sha256Digest = std::array<std::uint8_t, 32>;

/// Incremental SHA-256 (OpenSSL EVP underneath).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(std::span<const std::uint8_t> data);
  void update(std::string_view data);
  Sha256Digest finish();

 private:
  void* ctx_;
};

Sha256Digest sha256(std::string_view data);
Sha256Digest hmac_sha256(std::span<const std::uint8_t> key, std::string_view message);

std::string to_hex(std::span<const std::uint8_t> bytes);
/// Throws kBadRequest on odd length or non-hex input.
std::vector<std::uint8_t> from_hex(std::string_view hex);

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string base64_encode(std::string_view bytes);
/// Unpadded RFC 4648 section 5 alphabet.
std::string base64url_encode(std::string_view bytes);
/// Throws kBadRequest on characters outside the alphabet.
std::string base64_decode(std::string_view text);
std::string base64url_decode(std::string_view text);

/// "sha-256=<base64>" value for the Digest header.
std::string digest_header_value(const Sha256Digest& digest);
/// Extracts a sha-256 digest from a Digest header; empty on absence.
std::string sha256_hex_from_digest_header(std::string_view header);

}  // namespace httptpc
