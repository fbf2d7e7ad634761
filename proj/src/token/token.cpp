#include "httptpc/token/token.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <ctime>
#include <nlohmann/json.hpp>

#include "httptpc/core/error.hpp"

namespace httptpc::token {
namespace {

constexpr std::string_view kScopePrefix = "scope:";
constexpr std::string_view kBeforePrefix = "before:";
constexpr std::string_view kAudiencePrefix = "audience:";

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

[[noreturn]] void malformed(const std::string& what) {
  throw TpcException(ErrorKind::kBadRequest, "malformed token: " + what);
}

/// Splits caveats into groups; throws on empty groups.
std::vector<std::vector<Caveat>> parse_groups(std::span<const std::string> caveats) {
  std::vector<std::vector<Caveat>> groups(1);
  for (const auto& text : caveats) {
    if (text == kGroupSentinel) {
      if (groups.back().empty()) malformed("empty caveat group");
      groups.emplace_back();
      continue;
    }
    groups.back().push_back(Caveat::parse(text));
  }
  if (groups.back().empty()) malformed("empty caveat group");
  return groups;
}

}  // namespace

Caveat Caveat::parse(std::string_view text) {
  Caveat c;
  if (starts_with(text, kScopePrefix)) {
    c.kind = CaveatKind::kScope;
    const auto body = text.substr(kScopePrefix.size());
    c.scope = parse_scope(body);
    // The grammar is exact: the path must already be canonical.
    if (c.scope.str() != body) {
      throw TpcException(ErrorKind::kBadRequest,
                         "scope caveat path is not canonical: " + std::string(text));
    }
  } else if (starts_with(text, kBeforePrefix)) {
    c.kind = CaveatKind::kBefore;
    c.before = parse_rfc3339(text.substr(kBeforePrefix.size()));
  } else if (starts_with(text, kAudiencePrefix)) {
    c.kind = CaveatKind::kAudience;
    c.audience.assign(text.substr(kAudiencePrefix.size()));
    if (c.audience.empty()) {
      throw TpcException(ErrorKind::kBadRequest, "empty audience caveat");
    }
  } else {
    throw TpcException(ErrorKind::kBadRequest, "unknown caveat: " + std::string(text));
  }
  return c;
}

std::string scope_caveat(const Scope& scope) { return std::string(kScopePrefix) + scope.str(); }

std::string before_caveat(std::int64_t unix_seconds) {
  return std::string(kBeforePrefix) + format_rfc3339(unix_seconds);
}

std::string audience_caveat(std::string_view url) {
  return std::string(kAudiencePrefix) + std::string(url);
}

std::string format_rfc3339(std::int64_t unix_seconds) {
  const std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t parse_rfc3339(std::string_view text) {
  // YYYY-MM-DDTHH:MM:SSZ
  constexpr std::string_view shape = "dddd-dd-ddTdd:dd:ddZ";
  bool ok = text.size() == shape.size();
  for (std::size_t i = 0; ok && i < shape.size(); ++i) {
    ok = shape[i] == 'd' ? (text[i] >= '0' && text[i] <= '9') : text[i] == shape[i];
  }
  if (!ok) throw TpcException(ErrorKind::kBadRequest, "bad timestamp: " + std::string(text));
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = 0; i < len; ++i) v = v * 10 + (text[pos + i] - '0');
    return v;
  };
  std::tm tm{};
  tm.tm_year = num(0, 4) - 1900;
  tm.tm_mon = num(5, 2) - 1;
  tm.tm_mday = num(8, 2);
  tm.tm_hour = num(11, 2);
  tm.tm_min = num(14, 2);
  tm.tm_sec = num(17, 2);
  const auto t = timegm(&tm);
  if (format_rfc3339(t) != text) {
    throw TpcException(ErrorKind::kBadRequest, "bad timestamp: " + std::string(text));
  }
  return t;
}

std::span<const std::uint8_t> key_bytes(std::string_view secret) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(secret.data()), secret.size()};
}

Sha256Digest chain_signature(std::span<const std::uint8_t> root_key, std::string_view key_id,
                             std::span<const std::string> caveats) {
  auto sig = hmac_sha256(root_key, key_id);
  for (const auto& caveat : caveats) sig = hmac_sha256(sig, caveat);
  return sig;
}

TransferToken mint(std::span<const std::uint8_t> root_key, std::string issuer_location,
                   std::string key_id, std::vector<std::string> caveats) {
  TransferToken t;
  t.issuer_location = std::move(issuer_location);
  t.key_id = std::move(key_id);
  t.caveats = std::move(caveats);
  t.signature = chain_signature(root_key, t.key_id, t.caveats);
  return t;
}

TransferToken attenuate(const TransferToken& token, std::span<const std::string> group) {
  if (group.empty()) throw TpcException(ErrorKind::kBadRequest, "empty attenuation");
  for (const auto& caveat : group) {
    if (caveat == kGroupSentinel) {
      throw TpcException(ErrorKind::kBadRequest, "sentinel is not a caveat");
    }
    Caveat::parse(caveat);
  }
  TransferToken out = token;
  out.caveats.emplace_back(kGroupSentinel);
  out.signature = hmac_sha256(out.signature, kGroupSentinel);
  for (const auto& caveat : group) {
    out.caveats.push_back(caveat);
    out.signature = hmac_sha256(out.signature, caveat);
  }
  return out;
}

TransferToken attenuate(const TransferToken& token, std::string_view caveat) {
  const std::string one{caveat};
  return attenuate(token, std::span(&one, 1));
}

std::string serialize_token(const TransferToken& token) {
  const nlohmann::json doc{{"l", token.issuer_location},
                           {"k", token.key_id},
                           {"c", token.caveats},
                           {"s", to_hex(token.signature)}};
  return base64url_encode(doc.dump());
}

TransferToken parse_token(std::string_view text) {
  std::string raw;
  try {
    raw = base64url_decode(text);
  } catch (const TpcException&) {
    malformed("not base64url");
  }
  const auto doc = nlohmann::json::parse(raw, nullptr, false);
  if (doc.is_discarded() || !doc.is_object() || doc.size() != 4) malformed("not a token object");
  const auto field = [&](const char* name) -> const nlohmann::json& {
    auto it = doc.find(name);
    if (it == doc.end()) malformed(std::string("missing field ") + name);
    return *it;
  };
  const auto& l = field("l");
  const auto& k = field("k");
  const auto& c = field("c");
  const auto& s = field("s");
  if (!l.is_string() || !k.is_string() || !c.is_array() || !s.is_string()) {
    malformed("field types");
  }
  TransferToken t;
  t.issuer_location = l.get<std::string>();
  t.key_id = k.get<std::string>();
  for (const auto& item : c) {
    if (!item.is_string()) malformed("caveat is not a string");
    t.caveats.push_back(item.get<std::string>());
  }
  const auto sig_hex = s.get<std::string>();
  if (sig_hex.size() != 64) malformed("signature length");
  std::vector<std::uint8_t> sig;
  try {
    sig = from_hex(sig_hex);
  } catch (const TpcException&) {
    malformed("signature encoding");
  }
  std::copy(sig.begin(), sig.end(), t.signature.begin());
  // Canonical form only: re-serializing must reproduce the input.
  if (serialize_token(t) != text) malformed("non-canonical encoding");
  return t;
}

std::string_view to_string(VerifyFailure failure) noexcept {
  switch (failure) {
    case VerifyFailure::kBadSignature: return "BAD_SIGNATURE";
    case VerifyFailure::kExpired: return "EXPIRED";
    case VerifyFailure::kWrongAudience: return "WRONG_AUDIENCE";
    case VerifyFailure::kScopeDenied: return "SCOPE_DENIED";
    case VerifyFailure::kMalformed: return "MALFORMED";
  }
  return "MALFORMED";
}

namespace {

/// Checks everything except scope; on success returns the parsed groups.
VerifyResult check_envelope(const TransferToken& token, std::span<const std::uint8_t> root_key,
                            std::int64_t now, std::span<const std::string> audiences,
                            std::vector<std::vector<Caveat>>& groups) {
  const auto expected = chain_signature(root_key, token.key_id, token.caveats);
  if (CRYPTO_memcmp(expected.data(), token.signature.data(), expected.size()) != 0) {
    return VerifyResult::fail(VerifyFailure::kBadSignature, "signature chain mismatch");
  }
  try {
    groups = parse_groups(token.caveats);
  } catch (const TpcException& e) {
    return VerifyResult::fail(VerifyFailure::kMalformed, e.error().detail);
  }
  bool has_scope = false;
  bool has_before = false;
  for (const auto& c : groups.front()) {
    has_scope |= c.kind == CaveatKind::kScope;
  }
  for (const auto& group : groups) {
    for (const auto& c : group) {
      if (c.kind == CaveatKind::kBefore) {
        has_before = true;
        if (!(c.before > now)) {
          return VerifyResult::fail(VerifyFailure::kExpired,
                                    "token expired at " + format_rfc3339(c.before));
        }
      } else if (c.kind == CaveatKind::kAudience) {
        if (std::find(audiences.begin(), audiences.end(), c.audience) == audiences.end()) {
          return VerifyResult::fail(VerifyFailure::kWrongAudience,
                                    "token is for " + c.audience);
        }
      }
    }
  }
  if (!has_scope || !has_before) {
    return VerifyResult::fail(VerifyFailure::kMalformed,
                              "issued caveats need a scope and an expiry");
  }
  return VerifyResult::ok();
}

bool groups_authorize(const std::vector<std::vector<Caveat>>& groups, const Scope& needed) {
  for (const auto& group : groups) {
    bool constrains = false;
    bool grants = false;
    for (const auto& c : group) {
      if (c.kind != CaveatKind::kScope) continue;
      constrains = true;
      grants |= c.scope.covers(needed);
    }
    if (constrains && !grants) return false;
  }
  return true;
}

}  // namespace

VerifyResult verify(const TransferToken& token, std::span<const std::uint8_t> root_key,
                    std::int64_t now, const Scope& needed,
                    std::span<const std::string> audiences) {
  const Activity one[] = {needed.activity};
  return verify_any(token, root_key, now, needed.path, one, audiences);
}

VerifyResult verify(std::string_view serialized, std::span<const std::uint8_t> root_key,
                    std::int64_t now, const Scope& needed, std::string_view audience) {
  TransferToken token;
  try {
    token = parse_token(serialized);
  } catch (const TpcException& e) {
    return VerifyResult::fail(VerifyFailure::kMalformed, e.error().detail);
  }
  const std::string aud{audience};
  return verify(token, root_key, now, needed, std::span(&aud, 1));
}

VerifyResult verify_any(const TransferToken& token, std::span<const std::uint8_t> root_key,
                        std::int64_t now, const VirtualPath& path,
                        std::span<const Activity> activities,
                        std::span<const std::string> audiences) {
  std::vector<std::vector<Caveat>> groups;
  if (auto envelope = check_envelope(token, root_key, now, audiences, groups); !envelope) {
    return envelope;
  }
  for (auto activity : activities) {
    if (groups_authorize(groups, Scope{activity, path})) return VerifyResult::ok();
  }
  std::string wanted;
  for (auto activity : activities) {
    if (!wanted.empty()) wanted += '|';
    wanted += to_string(activity);
  }
  return VerifyResult::fail(VerifyFailure::kScopeDenied,
                            "no grant for " + wanted + ":" + path.str());
}

}  // namespace httptpc::token
