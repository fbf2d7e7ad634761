#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "httptpc/core/encoding.hpp"
#include "httptpc/core/scope.hpp"

namespace httptpc::token {

/// Separates attenuation groups inside the caveat list.
inline constexpr std::string_view kGroupSentinel = "::group::";

/// Opaque bearer token: an HMAC-chained caveat list.
///   sig_0 = HMAC(root_key, key_id); sig_i = HMAC(sig_{i-1}, caveat_i)
/// The chain covers every entry of `caveats`, group sentinels included.
struct TransferToken {
  std::string issuer_location;
  std::string key_id;
  std::vector<std::string> caveats;
  Sha256Digest signature{};

  friend bool operator==(const TransferToken&, const TransferToken&) = default;
};

enum class CaveatKind { kScope, kBefore, kAudience };

struct Caveat {
  CaveatKind kind = CaveatKind::kScope;
  Scope scope;               // kScope
  std::int64_t before = 0;   // kBefore, Unix seconds
  std::string audience;      // kAudience

  /// Strict grammar: "scope:<ACTIVITY>:<path>", "before:<RFC3339 UTC>",
  /// "audience:<url>". Throws TpcException(kBadRequest).
  static Caveat parse(std::string_view text);
};

std::string scope_caveat(const Scope& scope);
std::string before_caveat(std::int64_t unix_seconds);
std::string audience_caveat(std::string_view url);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_rfc3339(std::int64_t unix_seconds);
/// Accepts only the exact form produced by format_rfc3339.
std::int64_t parse_rfc3339(std::string_view text);

std::span<const std::uint8_t> key_bytes(std::string_view secret) noexcept;

Sha256Digest chain_signature(std::span<const std::uint8_t> root_key, std::string_view key_id,
                             std::span<const std::string> caveats);

/// Builds a token over `caveats` (no validation of their content).
TransferToken mint(std::span<const std::uint8_t> root_key, std::string issuer_location,
                   std::string key_id, std::vector<std::string> caveats);

/// Appends a new attenuation group and re-chains the signature from the
/// current one; the previous signature is not recoverable from the result.
/// Throws kBadRequest if any caveat is malformed or the group is empty.
TransferToken attenuate(const TransferToken& token, std::span<const std::string> group);
TransferToken attenuate(const TransferToken& token, std::string_view caveat);

/// base64url(JSON {"c","k","l","s"}), unpadded.
std::string serialize_token(const TransferToken& token);
/// Throws TpcException(kBadRequest) on any malformation.
TransferToken parse_token(std::string_view text);

enum class VerifyFailure { kBadSignature, kExpired, kWrongAudience, kScopeDenied, kMalformed };

std::string_view to_string(VerifyFailure failure) noexcept;

struct VerifyResult {
  bool pass = false;
  VerifyFailure reason = VerifyFailure::kMalformed;
  std::string detail;

  explicit operator bool() const noexcept { return pass; }
  static VerifyResult ok() { return {true, VerifyFailure::kMalformed, {}}; }
  static VerifyResult fail(VerifyFailure why, std::string detail = {}) {
    return {false, why, std::move(detail)};
  }
};

/// PASS iff the chain recomputes under `root_key`, every before caveat is
/// strictly later than `now`, every audience caveat names one of
/// `audiences`, and every group that carries scope caveats holds a scope
/// covering `needed` (union within a group, intersection across groups).
VerifyResult verify(const TransferToken& token, std::span<const std::uint8_t> root_key,
                    std::int64_t now, const Scope& needed,
                    std::span<const std::string> audiences);
VerifyResult verify(std::string_view serialized, std::span<const std::uint8_t> root_key,
                    std::int64_t now, const Scope& needed, std::string_view audience);

/// Like verify(), passing when any one of `activities` on `path` is
/// authorized. Failure reasons prefer the most specific cause.
VerifyResult verify_any(const TransferToken& token, std::span<const std::uint8_t> root_key,
                        std::int64_t now, const VirtualPath& path,
                        std::span<const Activity> activities,
                        std::span<const std::string> audiences);

}  // namespace httptpc::token
