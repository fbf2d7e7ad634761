#include "httptpc/token/issuer.hpp"

#include <openssl/crypto.h>

#include <algorithm>
#include <cctype>
#include <mutex>

#include "httptpc/core/error.hpp"
#include "httptpc/core/path.hpp"

namespace httptpc::token {
namespace {

bool constant_time_equal(std::string_view a, std::string_view b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

TokenHttpResponse oauth_error(int status, std::string_view code, std::string description) {
  TokenHttpResponse r;
  r.status = status;
  r.body = {{"error", code}, {"error_description", std::move(description)}};
  if (status == 401) r.headers.emplace_back("WWW-Authenticate", "Basic realm=\"token\"");
  return r;
}

}  // namespace

const ClientRegistration* AuthorizationPolicy::authenticate_basic(std::string_view client_id,
                                                                  std::string_view secret) const {
  auto it = clients.find(std::string(client_id));
  if (it == clients.end() || it->second.secret.empty()) return nullptr;
  return constant_time_equal(it->second.secret, secret) ? &it->second : nullptr;
}

const ClientRegistration* AuthorizationPolicy::authenticate_subject(
    std::string_view subject) const {
  if (subject.empty()) return nullptr;
  for (const auto& [id, reg] : clients) {
    for (const auto& s : reg.cert_subjects) {
      if (s == subject) return &reg;
    }
  }
  return nullptr;
}

std::int64_t granted_lifetime(const TokenRequest& request, const AuthorizationPolicy& policy) {
  auto lifetime = request.lifetime_hint.value_or(policy.default_lifetime);
  if (lifetime <= 0) lifetime = policy.default_lifetime;
  return std::min(lifetime, policy.max_lifetime);
}

TransferToken issue_token(const TokenRequest& request, const AuthorizationPolicy& policy,
                          const IssuerIdentity& issuer, std::int64_t now) {
  if (request.grant_type != "client_credentials") {
    throw TpcException(ErrorKind::kBadRequest,
                       "unsupported grant_type: " + request.grant_type);
  }
  if (request.requested_scopes.empty()) {
    throw TpcException(ErrorKind::kBadRequest, "no scopes requested");
  }
  auto client = policy.clients.find(request.client_id);
  if (client == policy.clients.end()) {
    throw TpcException(ErrorKind::kUnauthorized, "unknown client " + request.client_id);
  }
  std::vector<std::string> caveats;
  for (const auto& wanted : request.requested_scopes) {
    const bool granted =
        std::any_of(client->second.grants.begin(), client->second.grants.end(),
                    [&](const Scope& grant) { return grant.covers(wanted); });
    if (!granted) {
      throw TpcException(ErrorKind::kForbidden,
                         "scope " + wanted.str() + " exceeds grants of " + request.client_id);
    }
    caveats.push_back(scope_caveat(wanted));
  }
  caveats.push_back(before_caveat(now + granted_lifetime(request, policy)));
  if (issuer.audience) caveats.push_back(audience_caveat(*issuer.audience));
  return mint(key_bytes(issuer.root_key), issuer.location, issuer.key_id, std::move(caveats));
}

nlohmann::json discovery_document(std::string_view endpoint_base) {
  std::string base{endpoint_base};
  while (!base.empty() && base.back() == '/') base.pop_back();
  return {{"issuer", base}, {"token_endpoint", base + std::string(kTokenPath)}};
}

TokenService::TokenService(AuthorizationPolicy policy, IssuerIdentity issuer)
    : policy_(std::move(policy)), issuer_(std::move(issuer)) {}

void TokenService::reload_policy(AuthorizationPolicy policy) {
  std::unique_lock lock(mutex_);
  policy_ = std::move(policy);
}

TransferToken TokenService::issue(const TokenRequest& request, std::int64_t now) const {
  std::shared_lock lock(mutex_);
  return issue_token(request, policy_, issuer_, now);
}

TokenHttpResponse TokenService::handle_token_request(const TokenHttpRequest& request,
                                                     std::int64_t now) const {
  if (request.method != "POST") {
    return oauth_error(405, "invalid_request", "token endpoint accepts POST only");
  }
  std::shared_lock lock(mutex_);

  const ClientRegistration* client = nullptr;
  constexpr std::string_view kBasic = "Basic ";
  if (request.authorization.substr(0, kBasic.size()) == kBasic) {
    std::string decoded;
    try {
      decoded = base64_decode(request.authorization.substr(kBasic.size()));
    } catch (const TpcException&) {
      return oauth_error(401, "invalid_client", "malformed Basic credentials");
    }
    const auto colon = decoded.find(':');
    if (colon == std::string::npos) {
      return oauth_error(401, "invalid_client", "malformed Basic credentials");
    }
    client = policy_.authenticate_basic(decoded.substr(0, colon), decoded.substr(colon + 1));
  } else if (request.authorization.empty()) {
    client = policy_.authenticate_subject(request.peer_subject);
  }
  if (client == nullptr) return oauth_error(401, "invalid_client", "client authentication failed");

  const auto semi = request.content_type.find(';');
  if (request.content_type.substr(0, semi) != "application/x-www-form-urlencoded") {
    return oauth_error(400, "invalid_request", "expected a form-encoded body");
  }
  std::map<std::string, std::string> form;
  try {
    form = parse_form(request.body);
  } catch (const TpcException& e) {
    return oauth_error(400, "invalid_request", e.error().detail);
  }
  TokenRequest req;
  req.client_id = client->client_id;
  req.grant_type = form["grant_type"];
  if (req.grant_type != "client_credentials") {
    return oauth_error(400, "unsupported_grant_type", "only client_credentials is supported");
  }
  std::string_view scopes = form["scope"];
  while (!scopes.empty()) {
    const auto space = scopes.find(' ');
    const auto item = scopes.substr(0, space);
    if (!item.empty()) {
      try {
        req.requested_scopes.push_back(parse_scope(item));
      } catch (const TpcException& e) {
        return oauth_error(400, "invalid_scope", e.error().detail);
      }
    }
    if (space == std::string_view::npos) break;
    scopes.remove_prefix(space + 1);
  }
  if (req.requested_scopes.empty()) return oauth_error(400, "invalid_scope", "no scope requested");
  if (auto it = form.find("expires_in"); it != form.end()) {
    try {
      req.lifetime_hint = std::stoll(it->second);
    } catch (const std::exception&) {
      return oauth_error(400, "invalid_request", "expires_in is not an integer");
    }
  }

  try {
    const auto token = issue_token(req, policy_, issuer_, now);
    TokenHttpResponse r;
    r.body = {{"access_token", serialize_token(token)},
              {"token_type", "bearer"},
              {"expires_in", granted_lifetime(req, policy_)}};
    r.headers.emplace_back("Cache-Control", "no-store");
    return r;
  } catch (const TpcException& e) {
    switch (e.kind()) {
      case ErrorKind::kForbidden: return oauth_error(403, "invalid_scope", e.error().detail);
      case ErrorKind::kUnauthorized: return oauth_error(401, "invalid_client", e.error().detail);
      default: return oauth_error(400, "invalid_request", e.error().detail);
    }
  }
}

std::map<std::string, std::string> parse_form(std::string_view body) {
  std::map<std::string, std::string> out;
  while (!body.empty()) {
    const auto amp = body.find('&');
    auto pair = body.substr(0, amp);
    if (!pair.empty()) {
      const auto eq = pair.find('=');
      std::string key{pair.substr(0, eq)};
      std::string value{eq == std::string_view::npos ? std::string_view{} : pair.substr(eq + 1)};
      for (auto* s : {&key, &value}) std::replace(s->begin(), s->end(), '+', ' ');
      out[percent_decode(key)] = percent_decode(value);
    }
    if (amp == std::string_view::npos) break;
    body.remove_prefix(amp + 1);
  }
  return out;
}

std::string form_encode(std::string_view value) {
  static constexpr char kHex[] = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : value) {
    if (std::isalnum(c) || c == '-' || c == '.' || c == '_' || c == '~' || c == ':' ||
        c == '/') {
      out += static_cast<char>(c);
    } else if (c == ' ') {
      out += '+';
    } else {
      out += '%';
      out += kHex[c >> 4];
      out += kHex[c & 0xF];
    }
  }
  return out;
}

}  // namespace httptpc::token
