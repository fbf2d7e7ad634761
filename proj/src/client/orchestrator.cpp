#include "httptpc/client/orchestrator.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <thread>

#include "httptpc/core/encoding.hpp"
#include "httptpc/token/issuer.hpp"

namespace httptpc::client {
namespace {

using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t0) {
  return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

[[noreturn]] void throw_for_status(const net::ClientResponse& res, std::string_view what) {
  std::string detail = std::string(what) + " " + res.url + " answered " + std::to_string(res.status);
  std::string body = res.body.substr(0, 200);
  while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
  if (!body.empty()) detail += ": " + body;
  throw TpcException(error_kind_for_status(res.status), detail, res.status);
}

net::ClientRequest authed(std::string method, const std::string& token) {
  net::ClientRequest req;
  req.method = std::move(method);
  req.headers.emplace_back("Authorization", "Bearer " + token);
  req.max_redirects = net::kMaxRedirects;
  return req;
}

std::optional<std::string> digest_hex(const net::ClientResponse& res) {
  const auto h = res.header("Digest");
  if (!h) return std::nullopt;
  auto hex = sha256_hex_from_digest_header(*h);
  if (hex.empty()) return std::nullopt;
  return hex;
}

bool retryable(const TpcError& e) {
  if (e.kind == ErrorKind::kTimeout) return true;
  if (e.kind != ErrorKind::kRemoteFailure) return false;
  return !e.remote_status || *e.remote_status >= 500;
}

/// HEAD with a few quick retries on 5xx so digest checks survive flaky
/// endpoints.
net::ClientResponse head_with_retry(const Url& url, const std::string& token, const net::ClientTls& tls) {
  net::ClientResponse res;
  for (int i = 0; i < 5; ++i) {
    res = net::send(url, authed("HEAD", token), tls);
    if (res.status < 500) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50 * (i + 1)));
  }
  return res;
}

}  // namespace

std::string_view to_string(ModePreference mode) noexcept {
  switch (mode) {
    case ModePreference::kPull: return "PULL";
    case ModePreference::kPush: return "PUSH";
    case ModePreference::kAuto: return "AUTO";
  }
  return "?";
}

std::optional<ModePreference> parse_mode_preference(std::string_view text) noexcept {
  if (text == "PULL") return ModePreference::kPull;
  if (text == "PUSH") return ModePreference::kPush;
  if (text == "AUTO") return ModePreference::kAuto;
  return std::nullopt;
}

nlohmann::json TransferReport::to_json() const {
  using nlohmann::json;
  auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
  json attempts_json = json::array();
  for (const auto& a : attempt_log) {
    attempts_json.push_back({{"mode", std::string(httptpc::to_string(a.mode))},
                             {"active_endpoint", a.active_endpoint},
                             {"error", a.error ? json(a.error->to_string()) : json(nullptr)},
                             {"backoff_seconds", a.backoff_seconds}});
  }
  json marker_json = json::array();
  for (const auto& m : markers) {
    marker_json.push_back({{"timestamp", m.timestamp},
                           {"stripe_index", m.stripe_index},
                           {"stripe_bytes_transferred", m.stripe_bytes_transferred},
                           {"total_stripe_count", m.total_stripe_count}});
  }
  json j = {
      {"schema_version", "1"},
      {"report", "transfer"},
      {"source_url", spec.source_url},
      {"destination_url", spec.destination_url},
      {"preferred_mode", std::string(client::to_string(spec.preferred_mode))},
      {"mode", mode ? json(std::string(httptpc::to_string(*mode))) : json(nullptr)},
      {"active_endpoint", active_endpoint},
      {"attempts", attempts},
      {"attempt_log", attempts_json},
      {"outcome", succeeded ? "SUCCEEDED" : "FAILED"},
      {"error", error ? json({{"kind", std::string(httptpc::to_string(error->kind))},
                              {"detail", error->detail},
                              {"remote_status", opt(error->remote_status)}})
                      : json(nullptr)},
      {"bytes", bytes},
      {"duration_seconds", duration_seconds},
      {"markers", marker_json},
      {"source_digest", opt(source_digest)},
      {"destination_digest", opt(destination_digest)},
  };
  return j;
}

Orchestrator::Orchestrator(net::ClientTls tls, RetryPolicy retry)
    : tls_(std::move(tls)), retry_(retry), rng_(retry.seed) {}

std::string Orchestrator::acquire_token(const std::string& endpoint_base, const std::vector<Scope>& scopes,
                                        const ClientCredential& credential) const {
  const Url base = Url::parse(endpoint_base);
  net::ClientTls tls = tls_;
  if (credential.certificate) {
    tls.client_cert_pem = credential.certificate->cert_pem;
    tls.client_key_pem = credential.certificate->key_pem;
  }

  const auto doc_res = net::send(Url::parse(base.origin() + std::string(token::kDiscoveryPath)),
                                 net::ClientRequest{}, tls);
  if (doc_res.status != 200) {
    throw TpcException(ErrorKind::kProtocolViolation,
                       "no token discovery document at " + base.origin() + " (HTTP " +
                           std::to_string(doc_res.status) + ")");
  }
  std::string token_endpoint;
  try {
    const auto doc = nlohmann::json::parse(doc_res.body);
    token_endpoint = doc.at("token_endpoint").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TpcException(ErrorKind::kProtocolViolation,
                       "discovery document at " + base.origin() + " lacks a token_endpoint");
  }

  std::string scope_text;
  for (const auto& s : scopes) scope_text += (scope_text.empty() ? "" : " ") + s.str();
  net::ClientRequest req;
  req.method = "POST";
  req.headers.emplace_back("Content-Type", "application/x-www-form-urlencoded");
  if (!credential.certificate) {
    req.headers.emplace_back("Authorization",
                             "Basic " + base64_encode(credential.client_id + ":" + credential.secret));
  }
  req.body = "grant_type=client_credentials&scope=" + token::form_encode(scope_text);
  const auto res = net::send(Url::parse(token_endpoint), req, tls);
  if (res.status != 200) {
    std::string detail = "token request to " + token_endpoint + " answered " + std::to_string(res.status);
    try {
      const auto err = nlohmann::json::parse(res.body);
      detail += ": " + err.value("error", std::string()) + " " + err.value("error_description", std::string());
    } catch (const nlohmann::json::exception&) {
    }
    throw TpcException(error_kind_for_status(res.status), detail, res.status);
  }
  try {
    return nlohmann::json::parse(res.body).at("access_token").get<std::string>();
  } catch (const nlohmann::json::exception&) {
    throw TpcException(ErrorKind::kProtocolViolation, "token response from " + token_endpoint +
                                                          " lacks access_token");
  }
}

double Orchestrator::backoff_delay(int attempt) const {
  double delay = retry_.base_delay;
  for (int i = 1; i < attempt && delay < retry_.max_delay; ++i) delay *= retry_.factor;
  delay = std::min(delay, retry_.max_delay);
  std::lock_guard lock(rng_mu_);
  // Equal jitter: half fixed, half uniform.
  return delay / 2 + std::uniform_real_distribution<double>(0.0, delay / 2)(rng_);
}

struct Orchestrator::CopyOutcome {
  std::optional<TpcError> error;
  std::vector<PerfMarker> markers;
  std::uint64_t bytes = 0;
  int copy_status = 0;
};

Orchestrator::CopyOutcome Orchestrator::copy_once(TransferMode mode, const Url& source,
                                                  const Url& destination,
                                                  const std::string& source_token,
                                                  const std::string& destination_token,
                                                  const TransferSpec& spec) const {
  const bool pull = mode == TransferMode::kPull;
  const Url& active = pull ? destination : source;
  const Url& remote = pull ? source : destination;

  net::ClientRequest req;
  req.method = "COPY";
  req.headers.emplace_back("Authorization", "Bearer " + (pull ? destination_token : source_token));
  req.headers.emplace_back(pull ? "Source" : "Destination", remote.str());
  req.headers.emplace_back("TransferHeaderAuthorization", "Bearer " + (pull ? source_token : destination_token));
  if (spec.streams) req.headers.emplace_back("X-Number-Of-Streams", std::to_string(*spec.streams));
  req.read_timeout = spec.progress_timeout;

  CopyOutcome out;
  MarkerStreamParser parser;
  std::map<std::uint32_t, std::uint64_t> stripe_bytes;
  std::optional<TpcError> stream_error;

  // The watchdog drops the COPY connection once no stripe has advanced for
  // progress_timeout; the active endpoint sees the disconnect and cancels.
  std::mutex progress_mu;
  std::condition_variable progress_cv;
  auto last_progress = SteadyClock::now();
  bool finished = false;
  std::atomic<bool> stalled{false};
  net::Cancellation cancel;
  const auto limit = std::chrono::duration_cast<SteadyClock::duration>(
      std::chrono::duration<double>(spec.progress_timeout));
  std::thread watchdog([&] {
    std::unique_lock lock(progress_mu);
    while (!finished) {
      if (progress_cv.wait_until(lock, last_progress + limit, [&] { return finished; })) return;
      if (SteadyClock::now() >= last_progress + limit) {
        stalled = true;
        lock.unlock();
        cancel.cancel();
        return;
      }
    }
  });
  auto stop_watchdog = [&] {
    {
      std::lock_guard lock(progress_mu);
      finished = true;
    }
    progress_cv.notify_all();
    if (watchdog.joinable()) watchdog.join();
  };

  req.sink = [&](std::string_view chunk) {
    try {
      for (const auto& m : parser.feed(chunk)) {
        auto& known = stripe_bytes[m.stripe_index];
        if (m.stripe_bytes_transferred > known) {
          known = m.stripe_bytes_transferred;
          std::lock_guard lock(progress_mu);
          last_progress = SteadyClock::now();
        }
        out.markers.push_back(m);
      }
    } catch (const TpcException& e) {
      stream_error = e.error();
      return false;
    }
    return true;
  };

  auto finish_bytes = [&] {
    for (const auto& [_, b] : stripe_bytes) out.bytes += b;
  };
  try {
    const auto res = net::send(active, req, tls_, &cancel);
    stop_watchdog();
    out.copy_status = res.status;
    if (res.status != 202) throw_for_status(res, "COPY at");
    parser.finish();
  } catch (const TpcException& e) {
    stop_watchdog();
    finish_bytes();
    if (stalled) {
      out.error = TpcError{ErrorKind::kTimeout,
                           "no per-stripe progress for " + std::to_string(spec.progress_timeout) +
                               "s; cancelled COPY at " + active.origin(),
                           std::nullopt};
    } else if (stream_error) {
      out.error = stream_error;
    } else {
      out.error = e.error();
    }
    return out;
  }
  finish_bytes();
  const auto& terminal = *parser.terminal();
  if (!terminal.success) {
    out.error = parse_tpc_error(terminal.reason)
                    .value_or(TpcError{ErrorKind::kRemoteFailure, terminal.reason, std::nullopt});
  }
  return out;
}

TransferReport Orchestrator::third_party_copy(const TransferSpec& spec, const Credentials& credentials) const {
  const auto t0 = SteadyClock::now();
  TransferReport report;
  report.spec = spec;
  auto done = [&](std::optional<TpcError> error) {
    report.error = std::move(error);
    report.succeeded = !report.error;
    report.duration_seconds = seconds_since(t0);
    return report;
  };

  std::optional<Url> source, destination;
  try {
    if (spec.attempt_budget < 1) throw TpcException(ErrorKind::kBadRequest, "attempt_budget must be >= 1");
    source = Url::parse(spec.source_url);
    destination = Url::parse(spec.destination_url);
  } catch (const TpcException& e) {
    return done(e.error());
  }

  std::string source_token, destination_token;
  try {
    source_token = acquire_token(source->origin(), {Scope{Activity::kDownload, source->virtual_path()}},
                                 credentials.source);
    destination_token = acquire_token(
        destination->origin(),
        {Scope{spec.overwrite ? Activity::kManage : Activity::kUpload, destination->virtual_path()}},
        credentials.destination);
  } catch (const TpcException& e) {
    return done(e.error());
  }

  TransferMode mode = spec.preferred_mode == ModePreference::kPush ? TransferMode::kPush : TransferMode::kPull;
  bool may_fall_back = spec.preferred_mode == ModePreference::kAuto;
  std::optional<TpcError> last_error;
  while (report.attempts < spec.attempt_budget) {
    ++report.attempts;
    report.mode = mode;
    report.active_endpoint = (mode == TransferMode::kPull ? destination : source)->origin();
    auto outcome = copy_once(mode, *source, *destination, source_token, destination_token, spec);
    report.markers = std::move(outcome.markers);
    report.bytes = outcome.bytes;
    report.attempt_log.push_back({mode, report.active_endpoint, outcome.error, 0.0});
    last_error = outcome.error;
    if (!last_error) break;

    spdlog::info("COPY attempt {} ({}) failed: {}", report.attempts, httptpc::to_string(mode),
                 last_error->to_string());
    if (may_fall_back && (outcome.copy_status == 405 || outcome.copy_status == 501)) {
      mode = TransferMode::kPush;
      may_fall_back = false;
      continue;
    }
    if (!retryable(*last_error) || report.attempts >= spec.attempt_budget) break;
    const double delay = backoff_delay(report.attempts);
    report.attempt_log.back().backoff_seconds = delay;
    std::this_thread::sleep_for(std::chrono::duration<double>(delay));
  }
  if (last_error) return done(last_error);

  try {
    const auto src = head_with_retry(*source, source_token, tls_);
    const auto dst = head_with_retry(*destination, destination_token, tls_);
    if (dst.status != 200) throw_for_status(dst, "HEAD");
    report.source_digest = src.status == 200 ? digest_hex(src) : std::nullopt;
    report.destination_digest = digest_hex(dst);
    if (const auto len = dst.header("Content-Length")) report.bytes = std::stoull(*len);
    if (report.source_digest && report.destination_digest &&
        *report.source_digest != *report.destination_digest) {
      return done(TpcError{ErrorKind::kRemoteFailure,
                           "digest mismatch: source " + *report.source_digest + " destination " +
                               *report.destination_digest,
                           std::nullopt});
    }
  } catch (const TpcException& e) {
    return done(e.error());
  }
  return done(std::nullopt);
}

DownloadResult download(const std::string& url, const std::string& token, const net::ClientTls& tls,
                        std::optional<std::pair<std::uint64_t, std::uint64_t>> range) {
  auto req = authed("GET", token);
  if (range) {
    req.headers.emplace_back("Range", "bytes=" + std::to_string(range->first) + "-" +
                                          std::to_string(range->second - 1));
  }
  DownloadResult out;
  Sha256 hasher;
  req.sink = [&](std::string_view chunk) {
    hasher.update(chunk);
    out.data.append(chunk);
    return true;
  };
  const auto res = net::send(Url::parse(url), req, tls);
  if (res.status != 200 && res.status != 206) throw_for_status(res, "GET");
  out.status = res.status;
  out.final_url = res.url;
  out.redirects = res.redirects;
  out.sha256_hex = to_hex(hasher.finish());
  out.advertised_sha256_hex = digest_hex(res);
  if (res.status == 200 && out.advertised_sha256_hex && *out.advertised_sha256_hex != out.sha256_hex) {
    throw TpcException(ErrorKind::kProtocolViolation, "GET " + res.url + " body does not match its Digest");
  }
  return out;
}

int upload(const std::string& url, std::string_view data, const std::string& token,
           const net::ClientTls& tls) {
  auto req = authed("PUT", token);
  req.headers.emplace_back("Want-Digest", "sha-256");
  req.body = std::string(data);
  const auto res = net::send(Url::parse(url), req, tls);
  if (res.status != 201 && res.status != 204) throw_for_status(res, "PUT");
  if (const auto remote = digest_hex(res); remote && *remote != to_hex(sha256(data))) {
    throw TpcException(ErrorKind::kProtocolViolation, "PUT " + res.url + " stored a different digest");
  }
  return res.status;
}

ObjectInfo stat_object(const std::string& url, const std::string& token, const net::ClientTls& tls) {
  const auto res = net::send(Url::parse(url), authed("HEAD", token), tls);
  if (res.status != 200) throw_for_status(res, "HEAD");
  ObjectInfo info;
  info.size = std::stoull(res.header("Content-Length").value_or("0"));
  info.sha256_hex = digest_hex(res);
  return info;
}

void delete_object(const std::string& url, const std::string& token, const net::ClientTls& tls) {
  const auto res = net::send(Url::parse(url), authed("DELETE", token), tls);
  if (res.status != 204 && res.status != 200) throw_for_status(res, "DELETE");
}

}  // namespace httptpc::client
