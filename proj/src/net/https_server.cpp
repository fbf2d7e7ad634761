#include "httptpc/net/https_server.hpp"

#include <poll.h>
#include <sys/socket.h>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/ssl.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <condition_variable>
#include <limits>
#include <csignal>
#include <mutex>
#include <set>
#include <spdlog/spdlog.h>
#include <thread>

#include "httptpc/net/signals.hpp"

namespace httptpc::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace ssl = asio::ssl;
using tcp = asio::ip::tcp;
using TlsStream = ssl::stream<tcp::socket>;

std::string Exchange::read_body_all(std::size_t limit) {
  std::string out;
  char buf[64 * 1024];
  while (std::size_t n = read_body(buf)) {
    if (out.size() + n > limit) throw std::length_error("request body exceeds limit");
    out.append(buf, n);
  }
  return out;
}

namespace {

constexpr std::size_t kDrainLimit = std::size_t{1} << 30;

std::string verified_peer_subject(SSL* ssl) {
  X509* cert = SSL_get1_peer_certificate(ssl);
  if (cert == nullptr) return {};
  std::string subject;
  if (SSL_get_verify_result(ssl) == X509_V_OK) {
    BIO* out = BIO_new(BIO_s_mem());
    X509_NAME_print_ex(out, X509_get_subject_name(cert), 0, XN_FLAG_RFC2253);
    char* data = nullptr;
    const long n = BIO_get_mem_data(out, &data);
    subject.assign(data, static_cast<std::size_t>(n));
    BIO_free(out);
  }
  X509_free(cert);
  return subject;
}

class BeastExchange final : public Exchange {
 public:
  BeastExchange(TlsStream& stream, beast::flat_buffer& buffer,
                http::request_parser<http::buffer_body>& parser, const std::string& subject,
                const std::atomic<bool>& stopping)
      : stream_(stream), buffer_(buffer), parser_(parser), subject_(subject), stopping_(stopping) {}

  std::string_view method() const override {
    const auto m = parser_.get().method_string();
    return {m.data(), m.size()};
  }
  std::string_view target() const override {
    const auto t = parser_.get().target();
    return {t.data(), t.size()};
  }
  std::optional<std::string> header(std::string_view name) const override {
    const auto& fields = parser_.get().base();
    auto it = fields.find(beast::string_view(name.data(), name.size()));
    if (it == fields.end()) return std::nullopt;
    return std::string(it->value());
  }
  HeaderList headers() const override {
    HeaderList out;
    for (const auto& f : parser_.get().base()) {
      out.emplace_back(std::string(f.name_string()), std::string(f.value()));
    }
    return out;
  }
  const std::string& peer_subject() const override { return subject_; }

  std::size_t read_body(std::span<char> out) override {
    if (out.empty()) return 0;
    while (!parser_.is_done()) {
      auto& body = parser_.get().body();
      body.data = out.data();
      body.size = out.size();
      beast::error_code ec;
      http::read(stream_, buffer_, parser_, ec);
      if (ec == http::error::need_buffer) ec = {};
      if (ec) {
        broken_ = true;
        throw std::runtime_error("connection lost while reading request body: " + ec.message());
      }
      const std::size_t n = out.size() - body.size;
      if (n > 0) return n;
    }
    return 0;
  }

  void respond(int status, const HeaderList& headers, std::string_view body) override {
    if (responded_) return;
    responded_ = true;
    beast::error_code ec;
    if (is_head()) {
      http::response<http::empty_body> res{static_cast<http::status>(status), 11};
      apply(res, headers);
      http::response_serializer<http::empty_body> sr{res};
      http::write_header(stream_, sr, ec);
    } else {
      http::response<http::string_body> res{static_cast<http::status>(status), 11};
      apply(res, headers);
      res.body().assign(body.data(), body.size());
      res.content_length(body.size());
      http::write(stream_, res, ec);
    }
    if (ec) broken_ = true;
  }

  bool begin_response(int status, const HeaderList& headers,
                      std::optional<std::uint64_t> content_length) override {
    responded_ = true;
    streaming_ = std::make_unique<http::response<http::buffer_body>>(
        static_cast<http::status>(status), 11);
    apply(*streaming_, headers);
    if (content_length) {
      streaming_->content_length(*content_length);
    } else {
      streaming_->chunked(true);
    }
    serializer_ = std::make_unique<http::response_serializer<http::buffer_body>>(*streaming_);
    beast::error_code ec;
    http::write_header(stream_, *serializer_, ec);
    if (ec) broken_ = true;
    return !broken_;
  }

  bool write(std::string_view data) override {
    if (broken_ || !serializer_) return false;
    if (data.empty()) return true;
    auto& body = streaming_->body();
    body.data = const_cast<char*>(data.data());
    body.size = data.size();
    body.more = true;
    beast::error_code ec;
    http::write(stream_, *serializer_, ec);
    if (ec == http::error::need_buffer) ec = {};
    if (ec) broken_ = true;
    return !broken_;
  }

  bool end_response() override {
    if (broken_ || !serializer_) return false;
    auto& body = streaming_->body();
    body.data = nullptr;
    body.size = 0;
    body.more = false;
    beast::error_code ec;
    http::write(stream_, *serializer_, ec);
    if (ec) broken_ = true;
    return !broken_;
  }

  bool peer_gone() override {
    if (broken_ || stopping_.load()) return true;
    pollfd p{stream_.next_layer().native_handle(), POLLIN | POLLRDHUP, 0};
    if (::poll(&p, 1, 0) > 0 && (p.revents & (POLLIN | POLLRDHUP | POLLHUP | POLLERR))) {
      return true;
    }
    return false;
  }

  bool responded() const noexcept { return responded_; }
  bool broken() const noexcept { return broken_; }
  bool streaming_complete() const noexcept {
    return !serializer_ || serializer_->is_done();
  }

  // Consumes whatever body the handler left unread so the connection can
  // carry another request.
  bool drain() {
    if (broken_) return false;
    std::size_t total = 0;
    char scratch[64 * 1024];
    try {
      while (std::size_t n = read_body(scratch)) {
        total += n;
        if (total > kDrainLimit) return false;
      }
    } catch (const std::exception&) {
      return false;
    }
    return true;
  }

 private:
  bool is_head() const { return parser_.get().method() == http::verb::head; }

  template <class Message>
  void apply(Message& res, const HeaderList& headers) const {
    res.set(http::field::server, "httptpc");
    for (const auto& [name, value] : headers) res.insert(name, value);
    res.keep_alive(parser_.get().keep_alive());
  }

  TlsStream& stream_;
  beast::flat_buffer& buffer_;
  http::request_parser<http::buffer_body>& parser_;
  const std::string& subject_;
  const std::atomic<bool>& stopping_;
  bool responded_ = false;
  bool broken_ = false;
  std::unique_ptr<http::response<http::buffer_body>> streaming_;
  std::unique_ptr<http::response_serializer<http::buffer_body>> serializer_;
};

}  // namespace

struct HttpsServer::Impl {
  Impl(ServerTls t, Handler h) : tls(std::move(t)), handler(std::move(h)) {}

  ServerTls tls;
  Handler handler;
  asio::io_context ioc;
  ssl::context ctx{ssl::context::tls_server};
  std::optional<tcp::acceptor> acceptor;
  std::thread accept_thread;
  std::uint16_t port = 0;

  std::atomic<bool> stopping{false};
  std::mutex mu;
  std::condition_variable cv;
  std::set<int> session_fds;
  int active = 0;

  void accept_loop();
  void session(tcp::socket socket);
};

void HttpsServer::Impl::accept_loop() {
  while (!stopping.load()) {
    tcp::socket socket(ioc);
    beast::error_code ec;
    acceptor->accept(socket, ec);
    if (ec) {
      if (stopping.load()) break;
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    socket.set_option(tcp::no_delay(true), ec);
    {
      std::lock_guard lock(mu);
      if (stopping.load()) break;
      session_fds.insert(socket.native_handle());
      ++active;
    }
    std::thread([this, s = std::move(socket)]() mutable { session(std::move(s)); }).detach();
  }
}

void HttpsServer::Impl::session(tcp::socket socket) {
  const int fd = socket.native_handle();
  {
    TlsStream stream(std::move(socket), ctx);
    beast::error_code ec;
    stream.handshake(ssl::stream_base::server, ec);
    if (!ec) {
      const std::string subject = verified_peer_subject(stream.native_handle());
      beast::flat_buffer buffer;
      while (!stopping.load()) {
        http::request_parser<http::buffer_body> parser;
        parser.body_limit(std::numeric_limits<std::uint64_t>::max());
        parser.header_limit(64 * 1024);
        http::read_header(stream, buffer, parser, ec);
        if (ec) break;
        BeastExchange exchange(stream, buffer, parser, subject, stopping);
        try {
          handler(exchange);
        } catch (const std::exception& e) {
          spdlog::warn("handler error on {} {}: {}", exchange.method(), exchange.target(), e.what());
          if (!exchange.responded()) {
            exchange.respond(500, {{"Content-Type", "text/plain"}}, "internal error\n");
          }
        }
        if (!exchange.responded()) exchange.respond(500, {}, "no response\n");
        if (exchange.broken() || !exchange.streaming_complete()) break;
        if (!exchange.drain()) break;
        if (!parser.get().keep_alive()) break;
      }
      // One close_notify, without waiting for the peer's.
      SSL_shutdown(stream.native_handle());
    }
    stream.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    stream.next_layer().close(ec);
  }
  std::lock_guard lock(mu);
  session_fds.erase(fd);
  --active;
  cv.notify_all();
}

HttpsServer::HttpsServer(ServerTls tls, Handler handler)
    : impl_(std::make_unique<Impl>(std::move(tls), std::move(handler))) {
  ignore_sigpipe();
  auto& ctx = impl_->ctx;
  ctx.set_options(ssl::context::default_workarounds | ssl::context::no_sslv2 |
                  ssl::context::no_sslv3 | ssl::context::no_tlsv1 | ssl::context::no_tlsv1_1);
  ctx.use_certificate_chain(asio::buffer(impl_->tls.cert_pem));
  ctx.use_private_key(asio::buffer(impl_->tls.key_pem), ssl::context::pem);
  if (!impl_->tls.client_ca_pem.empty()) {
    ctx.add_certificate_authority(asio::buffer(impl_->tls.client_ca_pem));
    ctx.set_verify_mode(ssl::verify_peer);
    ctx.set_verify_callback([](bool, ssl::verify_context&) { return true; });
  }
}

HttpsServer::~HttpsServer() { stop(); }

std::uint16_t HttpsServer::bind(const std::string& host, std::uint16_t port) {
  tcp::acceptor acceptor(impl_->ioc);
  try {
    tcp::resolver resolver(impl_->ioc);
    const tcp::endpoint endpoint = *resolver.resolve(host, std::to_string(port)).begin();
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen(asio::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw std::system_error(e.code().value(), std::generic_category(),
                            "cannot listen on " + host + ":" + std::to_string(port));
  }
  impl_->port = acceptor.local_endpoint().port();
  impl_->acceptor.emplace(std::move(acceptor));
  return impl_->port;
}

void HttpsServer::start() {
  if (!impl_->acceptor) throw std::logic_error("HttpsServer::start before bind");
  impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpsServer::stop() {
  if (!impl_ || impl_->stopping.exchange(true)) return;
  if (impl_->acceptor) ::shutdown(impl_->acceptor->native_handle(), SHUT_RDWR);
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  if (impl_->acceptor) {
    beast::error_code ec;
    impl_->acceptor->close(ec);
  }
  std::unique_lock lock(impl_->mu);
  for (int fd : impl_->session_fds) ::shutdown(fd, SHUT_RDWR);
  impl_->cv.wait(lock, [&] { return impl_->active == 0; });
}

std::uint16_t HttpsServer::port() const noexcept { return impl_->port; }

}  // namespace httptpc::net
