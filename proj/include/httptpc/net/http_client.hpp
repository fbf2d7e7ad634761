#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "httptpc/core/url.hpp"
#include "httptpc/net/https_server.hpp"

namespace httptpc::net {

/// Redirects followed by default for data verbs.
inline constexpr int kMaxRedirects = 4;

struct ClientTls {
  std::string ca_pem;  // trust anchors; empty means the system store
  bool insecure = false;
  std::string client_cert_pem;  // optional mutual TLS identity
  std::string client_key_pem;
};

/// Streams a request body: fills `out` with bytes starting at `offset`
/// and returns how many were written (0 aborts the upload).
using BodySource = std::function<std::size_t(std::uint64_t offset, std::span<char> out)>;
/// Receives a 2xx response body chunk by chunk; false aborts.
using BodySink = std::function<bool(std::string_view chunk)>;

struct ClientRequest {
  std::string method = "GET";
  HeaderList headers;
  std::string body;
  /// When set, the body is streamed from `source` instead of `body`.
  std::optional<std::uint64_t> body_length;
  BodySource source;
  BodySink sink;
  int max_redirects = 0;
  double connect_timeout = 10.0;
  /// Seconds without any socket progress before the call fails.
  double read_timeout = 30.0;
};

struct ClientResponse {
  int status = 0;
  HeaderList headers;
  /// Error bodies always land here; 2xx bodies only without a sink.
  std::string body;
  std::string url;  // after redirects
  int redirects = 0;

  std::optional<std::string> header(std::string_view name) const;
};

/// Cooperative abort for in-flight requests: cancel() flips the flag and
/// shuts down every registered connection so blocked reads return.
class Cancellation {
 public:
  void cancel();
  bool cancelled() const noexcept { return cancelled_.load(); }

  std::uint64_t attach(std::function<void()> stopper);
  void detach(std::uint64_t id);

 private:
  std::atomic<bool> cancelled_{false};
  std::mutex mu_;
  std::uint64_t next_ = 0;
  std::map<std::uint64_t, std::function<void()>> stoppers_;
};

/// Performs one HTTPS exchange, following up to max_redirects 3xx hops.
/// Non-2xx statuses are returned, not thrown. Throws TpcException with
/// kTimeout (no progress within read_timeout), kCancelled, kRemoteFailure
/// (transport), or kProtocolViolation (redirect limit, bad Location).
ClientResponse send(const Url& url, const ClientRequest& request, const ClientTls& tls,
                    Cancellation* cancel = nullptr);

}  // namespace httptpc::net
