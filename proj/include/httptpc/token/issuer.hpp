#pragma once

#include <cstdint>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "httptpc/core/scope.hpp"
#include "httptpc/token/token.hpp"

namespace httptpc::token {

/// A client allowed to use the token endpoint, with its maximal grants.
struct ClientRegistration {
  std::string client_id;
  std::string secret;                      // HTTP Basic
  std::vector<std::string> cert_subjects;  // mutual-TLS subject names
  std::vector<Scope> grants;
};

struct AuthorizationPolicy {
  std::map<std::string, ClientRegistration> clients;
  std::int64_t default_lifetime = 3600;
  std::int64_t max_lifetime = 86400;

  const ClientRegistration* authenticate_basic(std::string_view client_id,
                                               std::string_view secret) const;
  const ClientRegistration* authenticate_subject(std::string_view subject) const;
};

struct TokenRequest {
  std::string grant_type;
  std::vector<Scope> requested_scopes;
  std::string client_id;
  std::optional<std::int64_t> lifetime_hint;
};

struct IssuerIdentity {
  std::string root_key;
  std::string key_id;
  std::string location;  // issuer base URL
  /// Bind tokens to this audience when set.
  std::optional<std::string> audience;
};

/// Issues a token whose scope caveats are exactly the requested scopes.
/// Throws kUnauthorized (unknown client), kBadRequest (grant type, no
/// scopes) or kForbidden (a scope outside the client's grants).
TransferToken issue_token(const TokenRequest& request, const AuthorizationPolicy& policy,
                          const IssuerIdentity& issuer, std::int64_t now);

/// Lifetime actually granted for a request.
std::int64_t granted_lifetime(const TokenRequest& request, const AuthorizationPolicy& policy);

/// OAuth2 authorization-server metadata for an endpoint.
nlohmann::json discovery_document(std::string_view endpoint_base);

inline constexpr std::string_view kDiscoveryPath = "/.well-known/oauth-authorization-server";
inline constexpr std::string_view kTokenPath = "/token";

/// Transport-neutral view of a POST to the token endpoint.
struct TokenHttpRequest {
  std::string method;
  std::string content_type;
  std::string body;
  std::string authorization;  // raw Authorization header
  std::string peer_subject;   // verified TLS client certificate subject, if any
};

struct TokenHttpResponse {
  int status = 200;
  nlohmann::json body;
  std::vector<std::pair<std::string, std::string>> headers;
};

/// Token endpoint: policy plus signing identity. Policy reloads take an
/// exclusive lock; issuance only reads.
class TokenService {
 public:
  TokenService(AuthorizationPolicy policy, IssuerIdentity issuer);

  TokenHttpResponse handle_token_request(const TokenHttpRequest& request,
                                         std::int64_t now) const;
  TransferToken issue(const TokenRequest& request, std::int64_t now) const;
  void reload_policy(AuthorizationPolicy policy);

  const IssuerIdentity& issuer() const noexcept { return issuer_; }

 private:
  mutable std::shared_mutex mutex_;
  AuthorizationPolicy policy_;
  IssuerIdentity issuer_;
};

/// application/x-www-form-urlencoded decoding ('+' is a space).
std::map<std::string, std::string> parse_form(std::string_view body);
std::string form_encode(std::string_view value);

}  // namespace httptpc::token
