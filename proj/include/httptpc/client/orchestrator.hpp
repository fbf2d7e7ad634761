#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httptpc/core/error.hpp"
#include "httptpc/core/perf_marker.hpp"
#include "httptpc/core/scope.hpp"
#include "httptpc/net/http_client.hpp"
#include "httptpc/net/tls.hpp"

namespace httptpc::client {

/// How the orchestrator authenticates to an endpoint's token service:
/// HTTP Basic with a client id and secret, or a client certificate.
struct ClientCredential {
  std::string client_id;
  std::string secret;
  std::optional<net::PemPair> certificate;
};

struct Credentials {
  ClientCredential source;
  ClientCredential destination;
};

enum class ModePreference { kPull, kPush, kAuto };
std::string_view to_string(ModePreference mode) noexcept;
std::optional<ModePreference> parse_mode_preference(std::string_view text) noexcept;

struct TransferSpec {
  std::string source_url;
  std::string destination_url;
  ModePreference preferred_mode = ModePreference::kAuto;
  std::optional<int> streams;
  double progress_timeout = 60.0;  // seconds without per-stripe byte progress
  bool overwrite = false;
  int attempt_budget = 3;
};

struct RetryPolicy {
  double base_delay = 1.0;
  double factor = 2.0;
  double max_delay = 30.0;
  std::uint64_t seed = 0;
};

struct AttemptRecord {
  TransferMode mode = TransferMode::kPull;
  std::string active_endpoint;
  std::optional<TpcError> error;  // unset on success
  double backoff_seconds = 0.0;   // delay taken before the next attempt
};

struct TransferReport {
  TransferSpec spec;
  std::optional<TransferMode> mode;
  std::string active_endpoint;
  int attempts = 0;  // COPY requests sent
  std::vector<AttemptRecord> attempt_log;
  bool succeeded = false;
  std::optional<TpcError> error;
  std::uint64_t bytes = 0;
  double duration_seconds = 0.0;
  std::vector<PerfMarker> markers;  // trace of the final attempt
  std::optional<std::string> source_digest;
  std::optional<std::string> destination_digest;

  nlohmann::json to_json() const;
};

struct ObjectInfo {
  std::uint64_t size = 0;
  std::optional<std::string> sha256_hex;
};

struct DownloadResult {
  std::string data;
  int status = 0;
  std::string final_url;
  int redirects = 0;
  std::string sha256_hex;  // of the bytes received
  std::optional<std::string> advertised_sha256_hex;
};

/// The third party: acquires per-endpoint tokens, drives COPY on the
/// active endpoint, watches markers, retries, and verifies digests.
/// Reentrant; concurrent calls share nothing but the jitter source.
class Orchestrator {
 public:
  explicit Orchestrator(net::ClientTls tls, RetryPolicy retry = {});

  /// Discovery, then a client-credentials grant for `scopes`.
  std::string acquire_token(const std::string& endpoint_base, const std::vector<Scope>& scopes,
                            const ClientCredential& credential) const;

  TransferReport third_party_copy(const TransferSpec& spec, const Credentials& credentials) const;

  /// Seconds to wait after failed attempt number `attempt` (1-based).
  double backoff_delay(int attempt) const;

  const net::ClientTls& tls() const noexcept { return tls_; }

 private:
  struct CopyOutcome;
  CopyOutcome copy_once(TransferMode mode, const Url& source, const Url& destination,
                        const std::string& source_token, const std::string& destination_token,
                        const TransferSpec& spec) const;

  net::ClientTls tls_;
  RetryPolicy retry_;
  mutable std::mutex rng_mu_;
  mutable std::mt19937_64 rng_;
};

/// Direct data access for seeding and verification. All follow up to four
/// redirects and map failure statuses onto TpcException.
DownloadResult download(const std::string& url, const std::string& token, const net::ClientTls& tls,
                        std::optional<std::pair<std::uint64_t, std::uint64_t>> range = std::nullopt);
/// PUT; returns the status (201 created, 204 overwritten) after checking
/// the endpoint's reported digest against the bytes sent.
int upload(const std::string& url, std::string_view data, const std::string& token,
           const net::ClientTls& tls);
ObjectInfo stat_object(const std::string& url, const std::string& token, const net::ClientTls& tls);
void delete_object(const std::string& url, const std::string& token, const net::ClientTls& tls);

}  // namespace httptpc::client
