#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httptpc/store/object_store.hpp"
#include "httptpc/token/issuer.hpp"

namespace httptpc::endpoint {

/// Test-only failure injection. Decisions are a pure function of the seed,
/// the request path and a per-path attempt counter.
struct FaultConfig {
  std::uint64_t seed = 0;
  double head_error_rate = 0.0;  // HEAD answered 503
  double get_error_rate = 0.0;   // GET answered 503
  double serve_rate_bytes_per_sec = 0.0;  // shared cap on GET bodies; 0 = unlimited
  std::optional<std::uint64_t> stall_after_bytes;  // GET bodies stop after this many bytes
  bool no_range_support = false;

  bool any() const noexcept;
};

struct TokenServiceConfig {
  bool enabled = true;
  std::string key_id = "k1";
  std::int64_t default_lifetime = 3600;
  std::int64_t max_lifetime = 86400;
  std::vector<token::ClientRegistration> clients;
};

struct TlsConfig {
  std::filesystem::path cert_file;
  std::filesystem::path key_file;
  std::filesystem::path ca_file;         // trust for outbound transfers
  std::filesystem::path client_ca_file;  // enables client certificate auth
  bool insecure_outbound = false;
};

struct EndpointConfig {
  std::string base_url;  // derived from the listen address when empty
  std::string listen_host = "127.0.0.1";
  std::uint16_t listen_port = 0;
  store::StoreConfig store;
  std::string token_root_key;
  std::vector<std::string> redirect_pool;
  double marker_period = 5.0;
  int pull_streams = 4;
  int max_active_copies = 8;
  double remote_timeout = 30.0;
  std::uint64_t min_stripe_bytes = 1 << 20;
  bool copy_enabled = true;
  bool propfind_enabled = true;
  TokenServiceConfig token_service;
  TlsConfig tls;
  FaultConfig faults;
};

/// Throws TpcException(kBadRequest) naming the offending field.
void validate(const EndpointConfig& config);

/// Field names match the struct members; unknown keys are rejected.
EndpointConfig endpoint_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const EndpointConfig& config);
EndpointConfig load_endpoint_config(const std::filesystem::path& file);

}  // namespace httptpc::endpoint
