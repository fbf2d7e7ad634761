#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace httptpc::net {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

struct ServerTls {
  std::string cert_pem;
  std::string key_pem;
  /// When set, clients are asked (not required) to present a certificate
  /// chaining to this CA; verified subjects reach handlers.
  std::string client_ca_pem;
};

/// One request/response exchange on a connection. Handlers run on the
/// connection's own thread, so every call here is blocking.
class Exchange {
 public:
  virtual ~Exchange() = default;

  virtual std::string_view method() const = 0;
  /// Raw request target: path plus optional "?query".
  virtual std::string_view target() const = 0;
  virtual std::optional<std::string> header(std::string_view name) const = 0;
  virtual HeaderList headers() const = 0;
  /// RFC 2253 subject of a verified client certificate, else empty.
  virtual const std::string& peer_subject() const = 0;

  /// Streams the request body; returns 0 once it is exhausted.
  virtual std::size_t read_body(std::span<char> out) = 0;
  std::string read_body_all(std::size_t limit);

  /// Complete response. For HEAD requests only the header is sent and a
  /// Content-Length in `headers` is passed through untouched.
  virtual void respond(int status, const HeaderList& headers, std::string_view body = {}) = 0;

  /// Streaming response: fixed length when `content_length` is given,
  /// chunked transfer coding otherwise. write() returns false once the
  /// peer can no longer be reached.
  virtual bool begin_response(int status, const HeaderList& headers,
                              std::optional<std::uint64_t> content_length) = 0;
  virtual bool write(std::string_view data) = 0;
  virtual bool end_response() = 0;

  /// True when the client has closed or reset its side, or the server is
  /// shutting down. Never blocks.
  virtual bool peer_gone() = 0;
};

using Handler = std::function<void(Exchange&)>;

/// TLS-only HTTP/1.1 server, one thread per connection.
class HttpsServer {
 public:
  HttpsServer(ServerTls tls, Handler handler);
  ~HttpsServer();
  HttpsServer(const HttpsServer&) = delete;
  HttpsServer& operator=(const HttpsServer&) = delete;

  /// Binds and listens; port 0 picks an ephemeral port. Throws
  /// std::system_error when the address is unavailable.
  std::uint16_t bind(const std::string& host, std::uint16_t port);
  void start();
  /// Closes the listener and every open connection, then waits for all
  /// connection threads to return.
  void stop();

  std::uint16_t port() const noexcept;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace httptpc::net
