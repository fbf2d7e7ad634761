#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httptpc/core/scope.hpp"
#include "httptpc/endpoint/config.hpp"
#include "httptpc/endpoint/copy_job.hpp"
#include "httptpc/net/http_client.hpp"
#include "httptpc/net/https_server.hpp"
#include "httptpc/store/object_store.hpp"
#include "httptpc/token/issuer.hpp"

namespace httptpc::endpoint {

/// Query parameter marking a request that was already redirected once.
inline constexpr std::string_view kRedirectedParam = "tpc-redirected=1";
inline constexpr std::string_view kStatusPath = "/.tpc/status";

struct EndpointTls {
  net::ServerTls server;
  net::ClientTls outbound;
};

/// Loads the configured certificate files, or mints an ephemeral CA and
/// leaf for the listen host when none are configured.
EndpointTls load_endpoint_tls(const EndpointConfig& config);

struct RequestLogEntry {
  std::string method;
  std::string target;
  std::string range;
  std::string authorization;
  std::string source;
  std::string destination;
  std::string transfer_authorization;
  int status = 0;
};

/// One storage endpoint: the data verbs on a namespace store, the token
/// service, and the COPY engine.
class Endpoint {
 public:
  Endpoint(EndpointConfig config, EndpointTls tls,
           std::shared_ptr<store::ObjectStore> store = nullptr);
  ~Endpoint();
  Endpoint(const Endpoint&) = delete;
  Endpoint& operator=(const Endpoint&) = delete;

  /// Binds and starts serving. Throws std::system_error when the listen
  /// address is taken.
  void start();
  void stop();

  const std::string& base_url() const noexcept { return base_url_; }
  const EndpointConfig& config() const noexcept { return config_; }
  store::ObjectStore& store() noexcept { return *store_; }
  const net::ClientTls& outbound_tls() const noexcept { return tls_.outbound; }

  void set_faults(const FaultConfig& faults);
  void set_redirect_pool(std::vector<std::string> pool);

  std::vector<RequestLogEntry> request_log() const;
  void clear_request_log();
  std::vector<JobSnapshot> jobs() const;
  nlohmann::json status_document() const;
  int max_running_observed() const { return admission_.max_running_observed(); }

  /// Mints a token with this endpoint's key, bypassing client policy.
  std::string mint_token(const std::vector<Scope>& scopes, std::int64_t lifetime = 3600) const;

 private:
  class Handlers;
  friend class Handlers;

  void handle(net::Exchange& exchange);

  EndpointConfig config_;
  EndpointTls tls_;
  std::shared_ptr<store::ObjectStore> store_;
  std::string base_url_;
  std::unique_ptr<net::HttpsServer> server_;
  std::unique_ptr<token::TokenService> token_service_;
  AdmissionQueue admission_;

  mutable std::mutex mu_;
  FaultConfig faults_;
  std::vector<std::string> redirect_pool_;
  std::uint64_t redirect_cursor_ = 0;
  std::map<std::string, std::uint64_t> fault_attempts_;
  std::vector<RequestLogEntry> request_log_;
  std::deque<std::shared_ptr<CopyJob>> jobs_;
  std::uint64_t next_job_id_ = 0;

  class RateLimiter;
  std::unique_ptr<RateLimiter> limiter_;
};

}  // namespace httptpc::endpoint
