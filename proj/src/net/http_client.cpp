#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httptpc/net/http_client.hpp"

#include <arpa/inet.h>
#include <openssl/pem.h>
#include <openssl/x509v3.h>

#include <chrono>
#include <httplib.h>
#include <strings.h>

#include "httptpc/core/error.hpp"
#include "httptpc/net/signals.hpp"

namespace httptpc::net {
namespace {

using Clock = std::chrono::steady_clock;
constexpr std::size_t kErrorBodyLimit = 64 * 1024;

void set_timeout(double seconds, auto&& setter) {
  const auto usec = static_cast<long long>(seconds * 1e6);
  setter(static_cast<time_t>(usec / 1000000), static_cast<time_t>(usec % 1000000));
}

std::unique_ptr<httplib::SSLClient> make_client(const Url& url, const ClientTls& tls) {
  std::unique_ptr<httplib::SSLClient> cli;
  if (!tls.client_cert_pem.empty() && !tls.client_key_pem.empty()) {
    BIO* cb = BIO_new_mem_buf(tls.client_cert_pem.data(), static_cast<int>(tls.client_cert_pem.size()));
    BIO* kb = BIO_new_mem_buf(tls.client_key_pem.data(), static_cast<int>(tls.client_key_pem.size()));
    X509* cert = PEM_read_bio_X509(cb, nullptr, nullptr, nullptr);
    EVP_PKEY* key = PEM_read_bio_PrivateKey(kb, nullptr, nullptr, nullptr);
    BIO_free(cb);
    BIO_free(kb);
    if (cert == nullptr || key == nullptr) {
      X509_free(cert);
      EVP_PKEY_free(key);
      throw TpcException(ErrorKind::kBadRequest, "unreadable client certificate or key");
    }
    cli = std::make_unique<httplib::SSLClient>(url.host, url.port, cert, key);
    X509_free(cert);
    EVP_PKEY_free(key);
  } else {
    cli = std::make_unique<httplib::SSLClient>(url.host, url.port);
  }
  if (!cli->is_valid()) {
    throw TpcException(ErrorKind::kRemoteFailure, "could not set up TLS client for " + url.origin());
  }
  // httplib's own verification reloads the system bundle into every new
  // context, which costs tens of milliseconds per request. OpenSSL checks
  // the chain and the host name itself when configured on the context.
  cli->enable_server_certificate_verification(false);
  if (!tls.insecure) {
    SSL_CTX* ctx = cli->ssl_context();
    if (!tls.ca_pem.empty()) {
      cli->load_ca_cert_store(tls.ca_pem.data(), tls.ca_pem.size());
    } else {
      SSL_CTX_set_default_verify_paths(ctx);
    }
    SSL_CTX_set_verify(ctx, SSL_VERIFY_PEER, nullptr);
    X509_VERIFY_PARAM* param = SSL_CTX_get0_param(ctx);
    unsigned char addr[16];
    const bool is_ip = inet_pton(AF_INET, url.host.c_str(), addr) == 1 || inet_pton(AF_INET6, url.host.c_str(), addr) == 1;
    if (is_ip) {
      X509_VERIFY_PARAM_set1_ip_asc(param, url.host.c_str());
    } else {
      X509_VERIFY_PARAM_set1_host(param, url.host.c_str(), url.host.size());
    }
  }
  cli->set_keep_alive(false);
  cli->set_tcp_nodelay(true);
  return cli;
}

class Attachment {
 public:
  Attachment(Cancellation* cancel, httplib::SSLClient& cli) : cancel_(cancel) {
    if (cancel_) id_ = cancel_->attach([&cli] { cli.stop(); });
  }
  ~Attachment() {
    if (cancel_) cancel_->detach(id_);
  }

 private:
  Cancellation* cancel_;
  std::uint64_t id_ = 0;
};

ClientResponse send_once(const Url& url, const ClientRequest& request, const ClientTls& tls,
                         Cancellation* cancel) {
  if (url.scheme != "https") {
    throw TpcException(ErrorKind::kBadRequest, "only https transfer URLs are supported: " + url.str());
  }
  auto cli = make_client(url, tls);
  set_timeout(request.connect_timeout, [&](time_t s, time_t u) { cli->set_connection_timeout(s, u); });
  set_timeout(request.read_timeout, [&](time_t s, time_t u) { cli->set_read_timeout(s, u); });
  set_timeout(request.read_timeout, [&](time_t s, time_t u) { cli->set_write_timeout(s, u); });

  Attachment attached(cancel, *cli);
  if (cancel && cancel->cancelled()) {
    throw TpcException(ErrorKind::kCancelled, "cancelled before contacting " + url.origin());
  }

  httplib::Headers headers;
  for (const auto& [k, v] : request.headers) headers.emplace(k, v);

  ClientResponse out;
  auto last_activity = Clock::now();
  bool sink_aborted = false;
  httplib::Result result{nullptr, httplib::Error::Unknown};
  httplib::Error error = httplib::Error::Success;
  httplib::Response res;

  if (request.source) {
    if (request.method != "PUT" || !request.body_length) {
      throw std::logic_error("streamed request bodies are supported for PUT with a length only");
    }
    std::vector<char> buf(256 * 1024);
    result = cli->Put(
        url.target(), headers, static_cast<std::size_t>(*request.body_length),
        [&](std::size_t offset, std::size_t length, httplib::DataSink& sink) {
          const std::size_t want = std::min(length, buf.size());
          const std::size_t n = request.source(offset, std::span<char>(buf.data(), want));
          if (n == 0) return false;
          last_activity = Clock::now();
          return sink.write(buf.data(), n);
        },
        "application/octet-stream");
    error = result.error();
    if (result) res = result.value();
  } else {
    httplib::Request req;
    req.method = request.method;
    req.path = url.target();
    req.headers = headers;
    req.body = request.body;
    if (!request.body.empty() && !req.has_header("Content-Type")) {
      req.set_header("Content-Type", "application/octet-stream");
    }
    req.response_handler = [&](const httplib::Response& r) {
      out.status = r.status;
      return true;
    };
    req.content_receiver = [&](const char* data, std::size_t n, std::uint64_t, std::uint64_t) {
      last_activity = Clock::now();
      if (out.status >= 200 && out.status < 300 && request.sink) {
        if (!request.sink(std::string_view(data, n))) {
          sink_aborted = true;
          return false;
        }
        return true;
      }
      if (out.body.size() < kErrorBodyLimit) out.body.append(data, std::min(n, kErrorBodyLimit));
      return true;
    };
    cli->send(req, res, error);
  }

  if (cancel && cancel->cancelled()) {
    throw TpcException(ErrorKind::kCancelled, "cancelled while talking to " + url.origin());
  }
  if (error != httplib::Error::Success) {
    if (sink_aborted || error == httplib::Error::Canceled) {
      throw TpcException(ErrorKind::kCancelled, "transfer from " + url.str() + " aborted");
    }
    const double idle = std::chrono::duration<double>(Clock::now() - last_activity).count();
    const bool stalled = (error == httplib::Error::Read || error == httplib::Error::Write) &&
                         idle >= request.read_timeout * 0.9;
    if (stalled || error == httplib::Error::ConnectionTimeout) {
      throw TpcException(ErrorKind::kTimeout,
                         "no progress from " + url.origin() + " for " +
                             std::to_string(static_cast<int>(idle)) + "s");
    }
    throw TpcException(ErrorKind::kRemoteFailure,
                       "transport error contacting " + url.origin() + ": " + httplib::to_string(error));
  }

  out.status = res.status;
  for (const auto& [k, v] : res.headers) out.headers.emplace_back(k, v);
  if (!request.sink || out.status < 200 || out.status >= 300) {
    if (!res.body.empty()) out.body = res.body;
  }
  return out;
}

Url resolve_location(const Url& base, const std::string& location) {
  if (location.rfind("https://", 0) == 0 || location.rfind("http://", 0) == 0) {
    return Url::parse(location);
  }
  if (!location.empty() && location.front() == '/') return Url::parse(base.origin() + location);
  throw TpcException(ErrorKind::kProtocolViolation, "unusable redirect Location: " + location);
}

}  // namespace

std::optional<std::string> ClientResponse::header(std::string_view name) const {
  for (const auto& [k, v] : headers) {
    if (k.size() == name.size() && strncasecmp(k.data(), name.data(), k.size()) == 0) return v;
  }
  return std::nullopt;
}

void Cancellation::cancel() {
  cancelled_.store(true);
  std::lock_guard lock(mu_);
  for (auto& [id, stop] : stoppers_) stop();
}

std::uint64_t Cancellation::attach(std::function<void()> stopper) {
  std::lock_guard lock(mu_);
  const auto id = ++next_;
  stoppers_.emplace(id, std::move(stopper));
  return id;
}

void Cancellation::detach(std::uint64_t id) {
  std::lock_guard lock(mu_);
  stoppers_.erase(id);
}

ClientResponse send(const Url& url, const ClientRequest& request, const ClientTls& tls,
                    Cancellation* cancel) {
  ignore_sigpipe();
  Url current = url;
  for (int hop = 0;; ++hop) {
    ClientResponse response = send_once(current, request, tls, cancel);
    const bool redirect = response.status >= 300 && response.status < 400 &&
                          response.status != 304 && response.header("Location").has_value();
    if (redirect && request.max_redirects > 0) {
      if (hop >= request.max_redirects) {
        throw TpcException(ErrorKind::kProtocolViolation,
                           "redirect limit of " + std::to_string(request.max_redirects) +
                               " exceeded at " + current.str());
      }
      current = resolve_location(current, *response.header("Location"));
      continue;
    }
    response.url = current.str();
    response.redirects = hop;
    return response;
  }
}

}  // namespace httptpc::net
