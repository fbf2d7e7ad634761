#include "httptpc/endpoint/endpoint.hpp"

#include <spdlog/spdlog.h>
#include <strings.h>

#include <charconv>
#include <thread>

#include "httptpc/core/encoding.hpp"
#include "httptpc/core/perf_marker.hpp"
#include "httptpc/endpoint/transfer.hpp"
#include "httptpc/net/tls.hpp"
#include "httptpc/token/token.hpp"

namespace httptpc::endpoint {
namespace {

using namespace std::chrono_literals;
using SteadyClock = std::chrono::steady_clock;
constexpr std::size_t kIoChunk = 64 * 1024;
constexpr std::size_t kMaxJobsRetained = 4096;

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && strncasecmp(a.data(), b.data(), a.size()) == 0;
}

bool istarts_with(std::string_view text, std::string_view prefix) {
  return text.size() >= prefix.size() && iequals(text.substr(0, prefix.size()), prefix);
}

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Records the status a handler sends, for the request log.
class RecordingExchange final : public net::Exchange {
 public:
  explicit RecordingExchange(net::Exchange& inner) : inner_(inner) {}

  std::string_view method() const override { return inner_.method(); }
  std::string_view target() const override { return inner_.target(); }
  std::optional<std::string> header(std::string_view name) const override { return inner_.header(name); }
  net::HeaderList headers() const override { return inner_.headers(); }
  const std::string& peer_subject() const override { return inner_.peer_subject(); }
  std::size_t read_body(std::span<char> out) override { return inner_.read_body(out); }
  void respond(int status, const net::HeaderList& headers, std::string_view body = {}) override {
    status_ = status;
    inner_.respond(status, headers, body);
  }
  bool begin_response(int status, const net::HeaderList& headers,
                      std::optional<std::uint64_t> length) override {
    status_ = status;
    return inner_.begin_response(status, headers, length);
  }
  bool write(std::string_view data) override { return inner_.write(data); }
  bool end_response() override { return inner_.end_response(); }
  bool peer_gone() override { return inner_.peer_gone(); }

  int status() const noexcept { return status_; }

 private:
  net::Exchange& inner_;
  int status_ = 0;
};

/// Parses a single-range "bytes=" header against `size`. nullopt means
/// serve the whole object; unsatisfiable ranges throw.
struct RangeNotSatisfiable {};

std::optional<store::ByteRange> parse_range(std::string_view header, std::uint64_t size) {
  constexpr std::string_view kPrefix = "bytes=";
  if (!header.starts_with(kPrefix) || header.find(',') != std::string_view::npos) return std::nullopt;
  const auto spec = header.substr(kPrefix.size());
  const auto dash = spec.find('-');
  if (dash == std::string_view::npos) return std::nullopt;
  auto number = [](std::string_view s) -> std::optional<std::uint64_t> {
    std::uint64_t v = 0;
    if (s.empty() || std::from_chars(s.data(), s.data() + s.size(), v).ptr != s.data() + s.size()) {
      return std::nullopt;
    }
    return v;
  };
  const auto first = spec.substr(0, dash);
  const auto last = spec.substr(dash + 1);
  if (first.empty()) {
    const auto suffix = number(last);
    if (!suffix) return std::nullopt;
    if (*suffix == 0 || size == 0) throw RangeNotSatisfiable{};
    return store::ByteRange{size - std::min(*suffix, size), size};
  }
  const auto start = number(first);
  if (!start) return std::nullopt;
  std::uint64_t end = size;
  if (!last.empty()) {
    const auto l = number(last);
    if (!l || *l < *start) return std::nullopt;
    end = std::min(*l + 1, size);
  }
  if (*start >= size) throw RangeNotSatisfiable{};
  return store::ByteRange{*start, end};
}

}  // namespace

class Endpoint::RateLimiter {
 public:
  void acquire(std::size_t bytes, double rate) {
    if (rate <= 0) return;
    SteadyClock::time_point slot;
    {
      std::lock_guard lock(mu_);
      const auto now = SteadyClock::now();
      slot = std::max(next_, now);
      next_ = slot + std::chrono::duration_cast<SteadyClock::duration>(
                         std::chrono::duration<double>(static_cast<double>(bytes) / rate));
    }
    std::this_thread::sleep_until(slot);
  }

 private:
  std::mutex mu_;
  SteadyClock::time_point next_{};
};

class Endpoint::Handlers {
 public:
  Handlers(Endpoint& ep, RecordingExchange& ex) : ep_(ep), ex_(ex) {}

  void dispatch() {
    const std::string target(ex_.target());
    const auto q = target.find('?');
    const std::string raw_path = target.substr(0, q);
    query_ = q == std::string::npos ? "" : target.substr(q + 1);
    const std::string method(ex_.method());

    if (raw_path == token::kDiscoveryPath) return discovery(method);
    if (raw_path == token::kTokenPath) return token_endpoint(method);
    if (raw_path == kStatusPath && method == "GET") {
      return ex_.respond(200, {{"Content-Type", "application/json"}}, ep_.status_document().dump());
    }

    path_ = VirtualPath::normalize(percent_decode(raw_path));
    if (method == "GET") return get();
    if (method == "HEAD") return head();
    if (method == "PUT") return put();
    if (method == "DELETE") return remove();
    if (method == "PROPFIND" && ep_.config_.propfind_enabled) return propfind();
    if (method == "COPY" && ep_.config_.copy_enabled) return copy();
    not_allowed();
  }

  void send_error(const TpcError& error) {
    net::HeaderList headers{{"Content-Type", "text/plain"}};
    if (error.kind == ErrorKind::kUnauthorized) headers.emplace_back("WWW-Authenticate", "Bearer");
    ex_.respond(http_status_for(error.kind), headers, error.to_string() + "\n");
  }

 private:
  void not_allowed() {
    std::string allow = "GET, HEAD, PUT, DELETE";
    if (ep_.config_.propfind_enabled) allow += ", PROPFIND";
    if (ep_.config_.copy_enabled) allow += ", COPY";
    ex_.respond(405, {{"Allow", allow}, {"Content-Type", "text/plain"}},
                std::string(ex_.method()) + " is not supported here\n");
  }

  // --- authorization -------------------------------------------------

  token::TransferToken bearer() const {
    const auto header = ex_.header("Authorization");
    if (!header || !istarts_with(*header, "Bearer ")) {
      throw TpcException(ErrorKind::kUnauthorized, "a bearer token is required");
    }
    try {
      return token::parse_token(std::string_view(*header).substr(7));
    } catch (const TpcException& e) {
      throw TpcException(ErrorKind::kUnauthorized, e.error().detail);
    }
  }

  /// The first of `activities` the token grants on the request path.
  Activity authorize(std::initializer_list<Activity> activities) const {
    const auto token = bearer();
    const std::vector<std::string> audiences{ep_.base_url_};
    const auto now = unix_now();
    std::optional<token::VerifyResult> denial;
    for (const Activity a : activities) {
      const auto r = token::verify(token, token::key_bytes(ep_.config_.token_root_key), now,
                                   Scope{a, path_}, audiences);
      if (r) return a;
      if (!denial || denial->reason == token::VerifyFailure::kScopeDenied) denial = r;
    }
    const auto why = std::string(token::to_string(denial->reason)) +
                     (denial->detail.empty() ? "" : ": " + denial->detail);
    if (denial->reason == token::VerifyFailure::kScopeDenied) {
      throw TpcException(ErrorKind::kForbidden, why);
    }
    throw TpcException(ErrorKind::kUnauthorized, why);
  }

  bool redirect_if_pooled() {
    if (query_.find(kRedirectedParam) != std::string::npos) return false;
    std::string member;
    {
      std::lock_guard lock(ep_.mu_);
      if (ep_.redirect_pool_.empty()) return false;
      member = ep_.redirect_pool_[ep_.redirect_cursor_++ % ep_.redirect_pool_.size()];
    }
    while (!member.empty() && member.back() == '/') member.pop_back();
    const std::string location = member + percent_encode_path(path_) + "?" + std::string(kRedirectedParam);
    ex_.read_body_all(std::size_t{1} << 34);  // the client resends the body to the target
    ex_.respond(302, {{"Location", location}, {"Content-Type", "text/plain"}}, "redirect\n");
    return true;
  }

  bool inject(std::string_view what, double rate) {
    if (rate <= 0) return false;
    std::uint64_t attempt = 0;
    std::uint64_t seed = 0;
    {
      std::lock_guard lock(ep_.mu_);
      attempt = ep_.fault_attempts_[std::string(what) + path_.str()]++;
      seed = ep_.faults_.seed;
    }
    const auto d = sha256(std::to_string(seed) + "|" + std::string(what) + "|" + path_.str() + "|" +
                          std::to_string(attempt));
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x = (x << 8) | d[i];
    return static_cast<double>(x) / 18446744073709551616.0 < rate;
  }

  FaultConfig faults() const {
    std::lock_guard lock(ep_.mu_);
    return ep_.faults_;
  }

  static net::HeaderList object_headers(const store::ObjectRecord& rec, bool ranges) {
    net::HeaderList h{{"Digest", digest_header_value(rec.sha256)},
                      {"ETag", "\"" + rec.sha256_hex().substr(0, 16) + "-" + std::to_string(rec.generation) + "\""}};
    if (ranges) h.emplace_back("Accept-Ranges", "bytes");
    return h;
  }

  // --- verbs ---------------------------------------------------------

  void discovery(const std::string& method) {
    if (!ep_.token_service_) return ex_.respond(404, {}, "token service disabled\n");
    if (method != "GET" && method != "HEAD") return ex_.respond(405, {{"Allow", "GET"}});
    ex_.respond(200, {{"Content-Type", "application/json"}},
                token::discovery_document(ep_.base_url_).dump());
  }

  void token_endpoint(const std::string& method) {
    if (!ep_.token_service_) return ex_.respond(404, {}, "token service disabled\n");
    if (method != "POST") return ex_.respond(405, {{"Allow", "POST"}});
    token::TokenHttpRequest req;
    req.method = method;
    req.content_type = ex_.header("Content-Type").value_or("");
    req.authorization = ex_.header("Authorization").value_or("");
    req.peer_subject = ex_.peer_subject();
    req.body = ex_.read_body_all(64 * 1024);
    const auto res = ep_.token_service_->handle_token_request(req, unix_now());
    net::HeaderList headers{{"Content-Type", "application/json"}, {"Cache-Control", "no-store"}};
    for (const auto& h : res.headers) headers.push_back(h);
    ex_.respond(res.status, headers, res.body.dump());
  }

  void head() {
    authorize({Activity::kDownload, Activity::kUpload, Activity::kManage, Activity::kDelete,
               Activity::kList});
    const auto f = faults();
    if (inject("HEAD", f.head_error_rate)) return ex_.respond(503, {{"Retry-After", "1"}});
    const auto rec = ep_.store_->stat(path_);
    auto headers = object_headers(rec, !f.no_range_support);
    headers.emplace_back("Content-Length", std::to_string(rec.size));
    headers.emplace_back("Content-Type", "application/octet-stream");
    ex_.respond(200, headers);
  }

  void get() {
    authorize({Activity::kDownload});
    if (redirect_if_pooled()) return;
    const auto f = faults();
    if (inject("GET", f.get_error_rate)) return ex_.respond(503, {{"Retry-After", "1"}});
    const auto reader = ep_.store_->open(path_);
    const auto& rec = reader->record();

    std::optional<store::ByteRange> range;
    if (const auto h = ex_.header("Range"); h && !f.no_range_support) {
      try {
        range = parse_range(*h, rec.size);
      } catch (const RangeNotSatisfiable&) {
        return ex_.respond(416, {{"Content-Range", "bytes */" + std::to_string(rec.size)}});
      }
    }
    const std::uint64_t start = range ? range->start : 0;
    const std::uint64_t end = range ? range->end : rec.size;
    auto headers = object_headers(rec, !f.no_range_support);
    headers.emplace_back("Content-Type", "application/octet-stream");
    if (range) {
      headers.emplace_back("Content-Range", "bytes " + std::to_string(start) + "-" +
                                                std::to_string(end - 1) + "/" + std::to_string(rec.size));
    }
    if (!ex_.begin_response(range ? 206 : 200, headers, end - start)) return;

    std::vector<char> buf(kIoChunk);
    std::uint64_t sent = 0;
    for (std::uint64_t off = start; off < end;) {
      std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(buf.size(), end - off));
      if (f.stall_after_bytes) {
        if (sent >= *f.stall_after_bytes) return stall();
        want = static_cast<std::size_t>(std::min<std::uint64_t>(want, *f.stall_after_bytes - sent));
      }
      const std::size_t n = reader->read(off, std::span<char>(buf.data(), want));
      if (n == 0) return;
      ep_.limiter_->acquire(n, f.serve_rate_bytes_per_sec);
      if (!ex_.write(std::string_view(buf.data(), n))) return;
      off += n;
      sent += n;
    }
    ex_.end_response();
  }

  // Holds the response open without sending until the peer gives up.
  void stall() {
    while (!ex_.peer_gone()) std::this_thread::sleep_for(20ms);
  }

  void put() {
    const Activity granted = authorize({Activity::kManage, Activity::kUpload});
    const bool overwrite = granted == Activity::kManage;
    if (redirect_if_pooled()) return;
    bool existed = true;
    try {
      ep_.store_->stat(path_);
    } catch (const TpcException& e) {
      if (e.kind() != ErrorKind::kNotFound) throw;
      existed = false;
    }
    if (existed && !overwrite) {
      throw TpcException(ErrorKind::kConflict, path_.str() + " exists and UPLOAD may not alter it");
    }
    auto write = ep_.store_->begin_put(path_, overwrite);
    std::vector<char> buf(4 * kIoChunk);
    while (const std::size_t n = ex_.read_body(buf)) {
      write->append(std::string_view(buf.data(), n));
    }
    std::optional<Sha256Digest> expected;
    if (const auto d = ex_.header("Digest")) {
      const auto hex = sha256_hex_from_digest_header(*d);
      if (hex.size() == 64) {
        const auto bytes = from_hex(hex);
        expected.emplace();
        std::copy(bytes.begin(), bytes.end(), expected->begin());
      }
    }
    const auto rec = write->commit(expected);
    net::HeaderList headers;
    if (ex_.header("Want-Digest").value_or("").find("sha-256") != std::string::npos) {
      headers.emplace_back("Digest", digest_header_value(rec.sha256));
    }
    ex_.respond(existed ? 204 : 201, headers);
  }

  void remove() {
    authorize({Activity::kDelete});
    ep_.store_->remove(path_);
    ex_.respond(204, {});
  }

  void propfind() {
    authorize({Activity::kList});
    const std::string depth = ex_.header("Depth").value_or("1");
    std::string xml = "<?xml version=\"1.0\" encoding=\"utf-8\"?>\n<D:multistatus xmlns:D=\"DAV:\">\n";
    auto entry = [&](const VirtualPath& p, bool container, const store::ObjectRecord* rec) {
      std::string href = percent_encode_path(p);
      if (container && href.back() != '/') href += '/';
      xml += "<D:response><D:href>" + xml_escape(href) + "</D:href><D:propstat><D:prop>";
      if (container) {
        xml += "<D:resourcetype><D:collection/></D:resourcetype>";
      } else {
        xml += "<D:resourcetype/><D:getcontentlength>" + std::to_string(rec->size) +
               "</D:getcontentlength>";
      }
      xml += "</D:prop><D:status>HTTP/1.1 200 OK</D:status></D:propstat></D:response>\n";
    };
    if (path_.is_root() || ep_.store_->is_container(path_)) {
      entry(path_, true, nullptr);
      if (depth != "0") {
        for (const auto& child : ep_.store_->list(path_)) {
          entry(path_.child(child.name), child.is_container, child.record ? &*child.record : nullptr);
        }
      }
    } else {
      const auto rec = ep_.store_->stat(path_);
      entry(path_, false, &rec);
    }
    xml += "</D:multistatus>\n";
    ex_.respond(207, {{"Content-Type", "application/xml; charset=utf-8"}}, xml);
  }

  void copy() {
    const auto source = ex_.header("Source");
    const auto destination = ex_.header("Destination");
    if (source.has_value() == destination.has_value()) {
      throw TpcException(ErrorKind::kBadRequest, "COPY needs exactly one of Source or Destination");
    }
    const TransferMode mode = source ? TransferMode::kPull : TransferMode::kPush;
    const Url remote = Url::parse(source ? *source : *destination);
    if (remote.scheme != "https") {
      throw TpcException(ErrorKind::kBadRequest, "only https transfer URLs are supported");
    }

    int streams = ep_.config_.pull_streams;
    if (const auto h = ex_.header("X-Number-Of-Streams")) {
      int v = 0;
      const auto r = std::from_chars(h->data(), h->data() + h->size(), v);
      if (r.ec != std::errc{} || r.ptr != h->data() + h->size()) {
        throw TpcException(ErrorKind::kBadRequest, "X-Number-Of-Streams must be an integer");
      }
      streams = std::clamp(v, 1, 16);
    }

    net::HeaderList forwarded;
    constexpr std::string_view kPrefix = "TransferHeader";
    for (const auto& [name, value] : ex_.headers()) {
      if (istarts_with(name, kPrefix) && name.size() > kPrefix.size()) {
        forwarded.emplace_back(name.substr(kPrefix.size()), value);
      }
    }

    bool overwrite = false;
    if (mode == TransferMode::kPull) {
      overwrite = authorize({Activity::kManage, Activity::kUpload}) == Activity::kManage;
      if (!path_.is_root() && ep_.store_->is_container(path_)) {
        throw TpcException(ErrorKind::kConflict, path_.str() + " is a container");
      }
      if (!overwrite) {
        bool exists = true;
        try {
          ep_.store_->stat(path_);
        } catch (const TpcException& e) {
          if (e.kind() != ErrorKind::kNotFound) throw;
          exists = false;
        }
        if (exists) {
          throw TpcException(ErrorKind::kConflict, path_.str() + " exists and UPLOAD may not alter it");
        }
      }
    } else {
      authorize({Activity::kDownload});
      ep_.store_->stat(path_);
    }

    std::shared_ptr<CopyJob> job;
    {
      std::lock_guard lock(ep_.mu_);
      job = std::make_shared<CopyJob>(++ep_.next_job_id_, mode, path_, remote, forwarded, overwrite,
                                      streams);
      ep_.jobs_.push_back(job);
      while (ep_.jobs_.size() > kMaxJobsRetained && is_terminal(ep_.jobs_.front()->state())) {
        ep_.jobs_.pop_front();
      }
    }
    spdlog::info("{} COPY {} {} {} (job {})", ep_.base_url_, to_string(mode), path_.str(), remote.str(),
                 job->id());

    if (!ex_.begin_response(202, {{"Content-Type", "text/plain"}, {"X-Tpc-Job", std::to_string(job->id())}},
                            std::nullopt)) {
      job->cancel();
    }
    TransferContext ctx{*ep_.store_, ep_.tls_.outbound, ep_.config_.remote_timeout,
                        ep_.config_.min_stripe_bytes};
    std::thread worker([&] { run_job(*job, ep_.admission_, ctx); });

    const auto period = std::chrono::duration_cast<SteadyClock::duration>(
        std::chrono::duration<double>(ep_.config_.marker_period));
    auto next_marker = SteadyClock::now() + period;
    bool gone = job->cancel_requested();
    while (!gone && !job->wait_terminal_until(std::min(next_marker, SteadyClock::now() + 100ms))) {
      if (ex_.peer_gone()) {
        gone = true;
        break;
      }
      if (SteadyClock::now() >= next_marker) {
        if (!emit_markers(*job)) gone = true;
        next_marker += period;
      }
    }
    if (gone) {
      spdlog::info("job {}: orchestrator went away, cancelling", job->id());
      job->cancel();
    }
    worker.join();
    if (gone) return;

    emit_markers(*job);
    const auto snap = job->snapshot();
    TerminalResult terminal = TerminalResult::created();
    if (snap.state == JobState::kFailed) {
      terminal = TerminalResult::failure(snap.failure ? snap.failure->to_string() : "unknown failure");
    } else if (snap.state == JobState::kCancelled) {
      terminal = TerminalResult::failure("CANCELLED: endpoint shutting down");
    }
    if (ex_.write(render_terminal(terminal))) ex_.end_response();
  }

  bool emit_markers(const CopyJob& job) {
    std::string block;
    for (const auto& m : job.markers(unix_now())) block += render_perf_marker(m);
    return ex_.write(block);
  }

  Endpoint& ep_;
  RecordingExchange& ex_;
  std::string query_;
  VirtualPath path_;
};

EndpointTls load_endpoint_tls(const EndpointConfig& config) {
  EndpointTls out;
  const auto& t = config.tls;
  if (!t.cert_file.empty()) {
    out.server.cert_pem = net::read_text_file(t.cert_file);
    out.server.key_pem = net::read_text_file(t.key_file);
  } else {
    net::EphemeralCa ca("httptpc serve CA");
    std::vector<std::string> hosts{config.listen_host};
    for (const char* h : {"127.0.0.1", "localhost"}) {
      if (config.listen_host != h) hosts.emplace_back(h);
    }
    const auto leaf = ca.issue_server(hosts);
    out.server.cert_pem = leaf.cert_pem;
    out.server.key_pem = leaf.key_pem;
    out.outbound.ca_pem = ca.cert_pem();
  }
  if (!t.ca_file.empty()) out.outbound.ca_pem = net::read_text_file(t.ca_file);
  if (!t.client_ca_file.empty()) out.server.client_ca_pem = net::read_text_file(t.client_ca_file);
  out.outbound.insecure = t.insecure_outbound;
  return out;
}

Endpoint::Endpoint(EndpointConfig config, EndpointTls tls, std::shared_ptr<store::ObjectStore> store)
    : config_(std::move(config)),
      tls_(std::move(tls)),
      store_(store ? std::move(store) : store::make_store(config_.store)),
      admission_(config_.max_active_copies),
      faults_(config_.faults),
      redirect_pool_(config_.redirect_pool),
      limiter_(std::make_unique<RateLimiter>()) {
  validate(config_);
}

Endpoint::~Endpoint() { stop(); }

void Endpoint::start() {
  server_ = std::make_unique<net::HttpsServer>(tls_.server, [this](net::Exchange& ex) { handle(ex); });
  const auto port = server_->bind(config_.listen_host, config_.listen_port);
  if (config_.base_url.empty()) {
    const bool v6 = config_.listen_host.find(':') != std::string::npos;
    base_url_ = "https://" + (v6 ? "[" + config_.listen_host + "]" : config_.listen_host) + ":" +
                std::to_string(port);
  } else {
    base_url_ = config_.base_url;
    while (base_url_.size() > 1 && base_url_.back() == '/') base_url_.pop_back();
  }
  if (config_.token_service.enabled) {
    token::AuthorizationPolicy policy;
    for (const auto& c : config_.token_service.clients) policy.clients[c.client_id] = c;
    policy.default_lifetime = config_.token_service.default_lifetime;
    policy.max_lifetime = config_.token_service.max_lifetime;
    token_service_ = std::make_unique<token::TokenService>(
        std::move(policy),
        token::IssuerIdentity{config_.token_root_key, config_.token_service.key_id, base_url_, std::nullopt});
  }
  server_->start();
  spdlog::info("endpoint listening on {}", base_url_);
}

void Endpoint::stop() {
  if (server_) server_->stop();
}

void Endpoint::handle(net::Exchange& raw) {
  RecordingExchange ex(raw);
  Handlers handlers(*this, ex);
  try {
    handlers.dispatch();
  } catch (const TpcException& e) {
    if (ex.status() == 0) handlers.send_error(e.error());
  } catch (const std::exception& e) {
    spdlog::warn("{} {} failed: {}", ex.method(), ex.target(), e.what());
    if (ex.status() == 0) ex.respond(500, {{"Content-Type", "text/plain"}}, "internal error\n");
  }
  RequestLogEntry entry;
  entry.method = std::string(ex.method());
  entry.target = std::string(ex.target());
  entry.range = ex.header("Range").value_or("");
  entry.authorization = ex.header("Authorization").value_or("");
  entry.source = ex.header("Source").value_or("");
  entry.destination = ex.header("Destination").value_or("");
  entry.transfer_authorization = ex.header("TransferHeaderAuthorization").value_or("");
  entry.status = ex.status();
  spdlog::debug("{} {} {} -> {}", base_url_, entry.method, entry.target, entry.status);
  std::lock_guard lock(mu_);
  request_log_.push_back(std::move(entry));
}

void Endpoint::set_faults(const FaultConfig& faults) {
  std::lock_guard lock(mu_);
  faults_ = faults;
  fault_attempts_.clear();
}

void Endpoint::set_redirect_pool(std::vector<std::string> pool) {
  std::lock_guard lock(mu_);
  redirect_pool_ = std::move(pool);
  redirect_cursor_ = 0;
}

std::vector<RequestLogEntry> Endpoint::request_log() const {
  std::lock_guard lock(mu_);
  return request_log_;
}

void Endpoint::clear_request_log() {
  std::lock_guard lock(mu_);
  request_log_.clear();
}

std::vector<JobSnapshot> Endpoint::jobs() const {
  std::lock_guard lock(mu_);
  std::vector<JobSnapshot> out;
  for (const auto& j : jobs_) out.push_back(j->snapshot());
  return out;
}

nlohmann::json Endpoint::status_document() const {
  nlohmann::json jobs = nlohmann::json::array();
  for (const auto& s : this->jobs()) jobs.push_back(s.to_json());
  return {{"schema_version", "1"},
          {"report", "endpoint_status"},
          {"base_url", base_url_},
          {"max_active_copies", config_.max_active_copies},
          {"running", admission_.running()},
          {"max_running_observed", admission_.max_running_observed()},
          {"jobs", jobs}};
}

std::string Endpoint::mint_token(const std::vector<Scope>& scopes, std::int64_t lifetime) const {
  std::vector<std::string> caveats;
  for (const auto& s : scopes) caveats.push_back(token::scope_caveat(s));
  caveats.push_back(token::before_caveat(unix_now() + lifetime));
  return token::serialize_token(token::mint(token::key_bytes(config_.token_root_key),
                                            base_url_.empty() ? "https://unbound" : base_url_,
                                            config_.token_service.key_id, caveats));
}

}  // namespace httptpc::endpoint
