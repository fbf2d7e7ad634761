#include "httptpc/harness/commands.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "httptpc/core/encoding.hpp"
#include "httptpc/harness/mesh.hpp"
#include "httptpc/net/tls.hpp"
#include "httptpc/token/issuer.hpp"

namespace httptpc::harness {
namespace {

using nlohmann::json;
using SteadyClock = std::chrono::steady_clock;

double seconds_since(SteadyClock::time_point t0) {
  return std::chrono::duration<double>(SteadyClock::now() - t0).count();
}

std::string join_url(const std::string& base, const std::string& path) {
  std::string b = base;
  while (!b.empty() && b.back() == '/') b.pop_back();
  return b + path;
}

json error_json(const std::optional<TpcError>& e) {
  if (!e) return nullptr;
  return {{"kind", std::string(to_string(e->kind))},
          {"detail", e->detail},
          {"remote_status", e->remote_status ? json(*e->remote_status) : json(nullptr)}};
}

/// Runs `count` tasks on `workers` threads; task(i) must not throw.
void run_pool(std::size_t count, int workers, const std::function<void(std::size_t)>& task) {
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), count);
  for (std::size_t w = 0; w < n; ++w) {
    threads.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) task(i);
    });
  }
  for (auto& t : threads) t.join();
}

TpcError as_error(const std::exception& e) {
  if (const auto* tpc = dynamic_cast<const TpcException*>(&e)) return tpc->error();
  return TpcError{ErrorKind::kRemoteFailure, e.what(), std::nullopt};
}

template <typename T>
T require(const json& doc, const char* key, const std::string& where) {
  if (!doc.contains(key)) throw TpcException(ErrorKind::kBadRequest, "mesh config: " + where + key + " is required");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw TpcException(ErrorKind::kBadRequest, "mesh config: " + where + key + " has the wrong type");
  }
}

void reject_unknown(const json& doc, std::initializer_list<std::string_view> known, const std::string& where) {
  for (const auto& [key, _] : doc.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw TpcException(ErrorKind::kBadRequest, "mesh config: unknown field " + where + key);
    }
  }
}

}  // namespace

std::string dataset_bytes(std::uint64_t seed, std::uint64_t index, std::uint64_t size) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  std::mt19937_64 rng(seq);
  std::string out(size, '\0');
  std::size_t i = 0;
  for (; i + 8 <= size; i += 8) {
    const std::uint64_t v = rng();
    for (int b = 0; b < 8; ++b) out[i + b] = static_cast<char>((v >> (8 * b)) & 0xff);
  }
  if (i < size) {
    const std::uint64_t v = rng();
    for (int b = 0; i < size; ++i, ++b) out[i] = static_cast<char>((v >> (8 * b)) & 0xff);
  }
  return out;
}

MeshConfig mesh_config_from_json(const json& doc) {
  if (!doc.is_object()) throw TpcException(ErrorKind::kBadRequest, "mesh config: top level must be an object");
  reject_unknown(doc, {"endpoints", "remote", "ca_file", "dataset"}, "");
  MeshConfig out;
  if (doc.contains("endpoints")) {
    const auto& eps = doc.at("endpoints");
    if (!eps.is_array()) throw TpcException(ErrorKind::kBadRequest, "mesh config: endpoints must be an array");
    for (std::size_t i = 0; i < eps.size(); ++i) {
      auto e = eps[i];
      // The mesh assigns ports and keys; fill placeholders so validation passes.
      if (!e.contains("token_root_key")) e["token_root_key"] = "assigned-by-mesh";
      try {
        out.endpoints.push_back(endpoint::endpoint_config_from_json(e));
      } catch (const TpcException& ex) {
        throw TpcException(ErrorKind::kBadRequest,
                           "mesh config: endpoints[" + std::to_string(i) + "]: " + ex.error().detail);
      }
    }
  }
  if (doc.contains("remote")) {
    const auto& rs = doc.at("remote");
    if (!rs.is_array()) throw TpcException(ErrorKind::kBadRequest, "mesh config: remote must be an array");
    for (std::size_t i = 0; i < rs.size(); ++i) {
      const std::string where = "remote[" + std::to_string(i) + "].";
      reject_unknown(rs[i], {"base_url", "client_id", "client_secret"}, where);
      MeshMember m;
      m.base_url = require<std::string>(rs[i], "base_url", where);
      m.credential.client_id = require<std::string>(rs[i], "client_id", where);
      m.credential.secret = rs[i].value("client_secret", std::string());
      out.remote.push_back(std::move(m));
    }
  }
  out.ca_file = doc.value("ca_file", std::string());
  if (doc.contains("dataset")) {
    const auto& d = doc.at("dataset");
    reject_unknown(d, {"file_count", "file_size_bytes", "seed"}, "dataset.");
    out.dataset.file_count = d.value("file_count", out.dataset.file_count);
    out.dataset.file_size_bytes = d.value("file_size_bytes", out.dataset.file_size_bytes);
    out.dataset.seed = d.value("seed", out.dataset.seed);
  }
  if (out.dataset.file_count < 1) {
    throw TpcException(ErrorKind::kBadRequest, "mesh config: dataset.file_count must be >= 1 (got " +
                                                   std::to_string(out.dataset.file_count) + ")");
  }
  if (!out.endpoints.empty() && !out.remote.empty()) {
    throw TpcException(ErrorKind::kBadRequest, "mesh config: use either endpoints or remote, not both");
  }
  return out;
}

MeshConfig load_mesh_config(const std::string& file) {
  json doc;
  try {
    doc = json::parse(net::read_text_file(file));
  } catch (const json::exception& e) {
    throw TpcException(ErrorKind::kBadRequest, "mesh config: " + file + " is not valid JSON: " + e.what());
  }
  return mesh_config_from_json(doc);
}

// ---- smoke ------------------------------------------------------------

std::string_view to_string(StepStatus status) noexcept {
  switch (status) {
    case StepStatus::kPass: return "PASS";
    case StepStatus::kFail: return "FAIL";
    case StepStatus::kSkipped: return "SKIPPED";
  }
  return "?";
}

bool SmokeReport::passed() const {
  return !steps.empty() &&
         std::all_of(steps.begin(), steps.end(), [](const auto& s) { return s.status == StepStatus::kPass; });
}

json SmokeReport::to_json() const {
  json arr = json::array();
  for (const auto& s : steps) {
    arr.push_back({{"name", s.name},
                   {"status", std::string(harness::to_string(s.status))},
                   {"detail", s.detail},
                   {"duration_seconds", s.duration_seconds}});
  }
  return {{"schema_version", std::string(kReportSchemaVersion)},
          {"report", "smoke"},
          {"endpoint", endpoint},
          {"passed", passed()},
          {"duration_seconds", duration_seconds},
          {"steps", arr}};
}

SmokeReport cmd_smoke(const SmokeOptions& o) {
  const auto t0 = SteadyClock::now();
  SmokeReport report;
  report.endpoint = o.target.base_url;
  std::map<std::string, StepStatus> status_of;

  auto step = [&](const std::string& name, std::initializer_list<std::string> deps,
                  const std::function<std::string()>& body) {
    StepResult r;
    r.name = name;
    const auto s0 = SteadyClock::now();
    for (const auto& d : deps) {
      if (status_of[d] != StepStatus::kPass) {
        r.status = StepStatus::kSkipped;
        r.detail = "requires " + d;
        break;
      }
    }
    if (r.detail.empty()) {
      try {
        r.detail = body();
        r.status = StepStatus::kPass;
      } catch (const std::exception& e) {
        r.status = StepStatus::kFail;
        r.detail = as_error(e).to_string();
      }
    }
    r.duration_seconds = seconds_since(s0);
    status_of[name] = r.status;
    spdlog::info("smoke {} {} {}", name, to_string(r.status), r.detail);
    report.steps.push_back(std::move(r));
  };

  // The spawned peer (if any) must outlive every COPY step.
  std::unique_ptr<Mesh> spawned;
  MeshMember peer;
  net::ClientTls tls = o.tls;
  std::optional<TpcError> peer_error;
  try {
    if (o.peer) {
      peer = *o.peer;
    } else {
      MeshOptions mo;
      mo.endpoints = 1;
      mo.base.token_root_key = "spawned";
      mo.seed = o.seed;
      spawned = std::make_unique<Mesh>(mo);
      peer = {spawned->url(0, ""), spawned->credential()};
      tls.ca_pem += spawned->ca().cert_pem();
    }
  } catch (const std::exception& e) {
    peer_error = as_error(e);
  }

  const client::Orchestrator orch(tls);
  const std::string base = o.target.base_url;
  const auto prefix = normalize_path(o.prefix);
  const std::string upload_path = prefix.str() + "/smoke-upload.dat";
  const std::string pull_path = prefix.str() + "/smoke-pulled.dat";
  const std::string data = dataset_bytes(o.seed, 0, o.upload_bytes);
  const std::string data_hex = to_hex(sha256(data));

  step("discovery", {}, [&] {
    const auto res = net::send(Url::parse(join_url(base, std::string(token::kDiscoveryPath))), {}, tls);
    if (res.status != 200) {
      throw TpcException(error_kind_for_status(res.status),
                         "discovery answered " + std::to_string(res.status), res.status);
    }
    return json::parse(res.body).at("token_endpoint").get<std::string>();
  });

  std::map<Activity, std::string> tokens;
  for (const Activity a : kAllActivities) {
    step("token:" + std::string(to_string(a)), {}, [&] {
      tokens[a] = orch.acquire_token(base, {Scope{a, prefix}}, o.target.credential);
      return "scope " + Scope{a, prefix}.str();
    });
  }

  step("upload", {"token:MANAGE"}, [&] {
    const int status = client::upload(join_url(base, upload_path), data, tokens[Activity::kManage], tls);
    const auto info = client::stat_object(join_url(base, upload_path), tokens[Activity::kManage], tls);
    if (info.size != data.size() || (info.sha256_hex && *info.sha256_hex != data_hex)) {
      throw TpcException(ErrorKind::kRemoteFailure, "stored object does not match the upload");
    }
    return "HTTP " + std::to_string(status) + ", " + std::to_string(data.size()) + " bytes";
  });

  step("ranged-download", {"upload", "token:DOWNLOAD"}, [&] {
    const std::uint64_t start = std::min<std::uint64_t>(4096, data.size() / 2);
    const std::uint64_t end = std::min<std::uint64_t>(start + 65536, data.size());
    const auto got =
        client::download(join_url(base, upload_path), tokens[Activity::kDownload], tls, std::make_pair(start, end));
    if (got.status != 206) throw TpcException(ErrorKind::kProtocolViolation, "expected 206, got " + std::to_string(got.status));
    if (got.data != data.substr(start, end - start)) {
      throw TpcException(ErrorKind::kProtocolViolation, "range bytes differ from the uploaded object");
    }
    return "bytes " + std::to_string(start) + "-" + std::to_string(end - 1);
  });

  auto copy_step = [&](const std::string& name, bool pull, std::initializer_list<std::string> deps) {
    step(name, deps, [&] {
      if (peer_error) throw TpcException(*peer_error);
      client::TransferSpec spec;
      spec.preferred_mode = pull ? client::ModePreference::kPull : client::ModePreference::kPush;
      spec.overwrite = true;
      spec.attempt_budget = 1;
      std::string expected;
      client::Credentials creds;
      if (pull) {
        const std::string peer_data = dataset_bytes(o.seed, 1, o.upload_bytes);
        expected = to_hex(sha256(peer_data));
        const auto seed_tok = orch.acquire_token(peer.base_url, {Scope{Activity::kManage, prefix}}, peer.credential);
        client::upload(join_url(peer.base_url, prefix.str() + "/smoke-pull-source.dat"), peer_data, seed_tok, tls);
        spec.source_url = join_url(peer.base_url, prefix.str() + "/smoke-pull-source.dat");
        spec.destination_url = join_url(base, pull_path);
        creds = {peer.credential, o.target.credential};
      } else {
        expected = data_hex;
        spec.source_url = join_url(base, upload_path);
        spec.destination_url = join_url(peer.base_url, prefix.str() + "/smoke-pushed.dat");
        creds = {o.target.credential, peer.credential};
      }
      const auto r = orch.third_party_copy(spec, creds);
      if (!r.succeeded) throw TpcException(*r.error);
      if (r.destination_digest != expected) {
        throw TpcException(ErrorKind::kRemoteFailure, "destination digest differs from the source bytes");
      }
      return std::to_string(r.bytes) + " bytes via " + r.active_endpoint;
    });
  };
  copy_step("pull-copy", true, {"discovery", "token:MANAGE"});
  copy_step("push-copy", false, {"upload", "token:DOWNLOAD"});

  step("delete", {"upload", "token:DELETE"}, [&] {
    const auto& tok = tokens[Activity::kDelete];
    client::delete_object(join_url(base, upload_path), tok, tls);
    if (status_of["pull-copy"] == StepStatus::kPass) client::delete_object(join_url(base, pull_path), tok, tls);
    try {
      client::stat_object(join_url(base, upload_path), tok, tls);
    } catch (const TpcException& e) {
      if (e.error().kind == ErrorKind::kNotFound) return std::string("object gone");
      throw;
    }
    throw TpcException(ErrorKind::kRemoteFailure, "object still present after DELETE");
  });

  report.duration_seconds = seconds_since(t0);
  return report;
}

// ---- matrix -----------------------------------------------------------

int MatrixReport::succeeded() const {
  return static_cast<int>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return c.succeeded; }));
}

int MatrixReport::failed() const { return static_cast<int>(cells.size()) - succeeded(); }

json MatrixReport::to_json() const {
  json arr = json::array();
  for (const auto& c : cells) {
    arr.push_back({{"source", c.source},
                   {"destination", c.destination},
                   {"source_url", endpoints.at(c.source)},
                   {"destination_url", endpoints.at(c.destination)},
                   {"mode", std::string(to_string(c.mode))},
                   {"auth", "token"},
                   {"outcome", c.succeeded ? "SUCCEEDED" : "FAILED"},
                   {"duration_seconds", c.duration_seconds},
                   {"bytes", c.bytes},
                   {"digests_match", c.digests_match},
                   {"error", error_json(c.error)}});
  }
  return {{"schema_version", std::string(kReportSchemaVersion)},
          {"report", "matrix"},
          {"endpoints", endpoints},
          {"cells", arr},
          {"summary", {{"cells", cells.size()}, {"succeeded", succeeded()}, {"failed", failed()}}},
          {"duration_seconds", duration_seconds}};
}

std::string MatrixReport::render_table() const {
  const std::size_t n = endpoints.size();
  std::map<std::pair<std::size_t, std::size_t>, std::string> text;
  for (const auto& c : cells) {
    auto& t = text[{c.source, c.destination}];
    if (!t.empty()) t += " ";
    t += std::string(to_string(c.mode)) + ":";
    t += c.succeeded ? "OK" : "FAIL(" + std::string(c.error ? to_string(c.error->kind) : "DIGEST") + ")";
  }
  std::size_t width = 8;
  for (const auto& [_, t] : text) width = std::max(width, t.size());
  auto pad = [&](std::string s) {
    s.resize(std::max(width, s.size()), ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("src\\dst");
  for (std::size_t d = 0; d < n; ++d) out << " | " << pad("ep" + std::to_string(d));
  out << "\n";
  for (std::size_t s = 0; s < n; ++s) {
    out << pad("ep" + std::to_string(s));
    for (std::size_t d = 0; d < n; ++d) out << " | " << pad(s == d ? "-" : text[{s, d}]);
    out << "\n";
  }
  for (std::size_t i = 0; i < n; ++i) out << "ep" << i << " = " << endpoints[i] << "\n";
  out << succeeded() << "/" << cells.size() << " cells succeeded\n";
  return out.str();
}

MatrixReport cmd_matrix(const std::vector<MeshMember>& members, const net::ClientTls& tls,
                        const MatrixOptions& options) {
  const auto t0 = SteadyClock::now();
  MatrixReport report;
  for (const auto& m : members) report.endpoints.push_back(m.base_url);
  const client::Orchestrator orch(tls);
  const auto dir = normalize_path("/matrix");

  std::vector<std::string> expected(members.size());
  std::vector<std::optional<TpcError>> seed_error(members.size());
  run_pool(members.size(), options.workers, [&](std::size_t i) {
    try {
      const auto data = dataset_bytes(options.seed, i, options.file_size_bytes);
      expected[i] = to_hex(sha256(data));
      const auto tok = orch.acquire_token(members[i].base_url, {Scope{Activity::kManage, dir}}, members[i].credential);
      client::upload(join_url(members[i].base_url, "/matrix/seed-" + std::to_string(i) + ".dat"), data, tok, tls);
    } catch (const std::exception& e) {
      seed_error[i] = as_error(e);
    }
  });

  for (std::size_t s = 0; s < members.size(); ++s) {
    for (std::size_t d = 0; d < members.size(); ++d) {
      if (s == d) continue;
      for (const auto mode : {TransferMode::kPull, TransferMode::kPush}) {
        MatrixCell cell;
        cell.source = s;
        cell.destination = d;
        cell.mode = mode;
        report.cells.push_back(cell);
      }
    }
  }
  run_pool(report.cells.size(), options.workers, [&](std::size_t i) {
    auto& cell = report.cells[i];
    const auto c0 = SteadyClock::now();
    if (seed_error[cell.source]) {
      cell.error = TpcError{seed_error[cell.source]->kind, "seeding source failed: " + seed_error[cell.source]->detail,
                            seed_error[cell.source]->remote_status};
      return;
    }
    client::TransferSpec spec;
    spec.source_url = join_url(members[cell.source].base_url, "/matrix/seed-" + std::to_string(cell.source) + ".dat");
    spec.destination_url = join_url(members[cell.destination].base_url,
                                    "/matrix/from-" + std::to_string(cell.source) + "-" +
                                        (cell.mode == TransferMode::kPull ? "pull" : "push") + ".dat");
    spec.preferred_mode =
        cell.mode == TransferMode::kPull ? client::ModePreference::kPull : client::ModePreference::kPush;
    spec.overwrite = true;
    spec.attempt_budget = options.attempt_budget;
    const auto r = orch.third_party_copy(spec, {members[cell.source].credential, members[cell.destination].credential});
    cell.duration_seconds = seconds_since(c0);
    cell.bytes = r.bytes;
    cell.error = r.error;
    cell.digests_match = r.succeeded && r.source_digest == expected[cell.source] &&
                         r.destination_digest == expected[cell.source];
    cell.succeeded = r.succeeded && cell.digests_match;
    if (r.succeeded && !cell.digests_match) {
      cell.error = TpcError{ErrorKind::kRemoteFailure, "digest mismatch after transfer", std::nullopt};
    }
  });
  report.duration_seconds = seconds_since(t0);
  return report;
}

// ---- scale drill ------------------------------------------------------

int ScaleDrillReport::transfers_succeeded() const {
  int n = 0;
  for (const auto& c : cycles) n += c.transfers_succeeded;
  return n;
}

int ScaleDrillReport::transfers_failed() const {
  int n = 0;
  for (const auto& c : cycles) n += c.transfers_failed;
  return n;
}

std::uint64_t ScaleDrillReport::bytes_moved() const {
  std::uint64_t n = 0;
  for (const auto& c : cycles) n += c.bytes_moved;
  return n;
}

bool ScaleDrillReport::passed() const {
  return std::none_of(cycles.begin(), cycles.end(),
                      [](const auto& c) { return c.abort_error || c.transfers_failed > 0; });
}

json ScaleDrillReport::to_json() const {
  json cycles_json = json::array();
  for (const auto& c : cycles) {
    cycles_json.push_back({{"cycle", c.cycle},
                           {"transfers_succeeded", c.transfers_succeeded},
                           {"transfers_failed", c.transfers_failed},
                           {"retries", c.retries},
                           {"bytes_moved", c.bytes_moved},
                           {"digests_verified", c.digests_verified},
                           {"replicas_deleted", c.replicas_deleted},
                           {"duration_seconds", c.duration_seconds},
                           {"aborted", c.abort_error.has_value()},
                           {"error", error_json(c.abort_error)}});
  }
  json intervals_json = json::array();
  for (const auto& s : intervals) {
    intervals_json.push_back({{"start_seconds", s.start_seconds},
                              {"bytes", s.bytes},
                              {"transfers", s.transfers},
                              {"bytes_per_second", static_cast<double>(s.bytes) / interval_seconds}});
  }
  return {{"schema_version", std::string(kReportSchemaVersion)},
          {"report", "scale_drill"},
          {"endpoints", endpoints},
          {"dataset",
           {{"file_count", dataset.file_count},
            {"file_size_bytes", dataset.file_size_bytes},
            {"seed", dataset.seed}}},
          {"cycles", cycles_json},
          {"interval_seconds", interval_seconds},
          {"intervals", intervals_json},
          {"totals",
           {{"transfers_succeeded", transfers_succeeded()},
            {"transfers_failed", transfers_failed()},
            {"bytes_moved", bytes_moved()}}},
          {"passed", passed()},
          {"duration_seconds", duration_seconds}};
}

ScaleDrillReport cmd_scale_drill(const std::vector<MeshMember>& members, const net::ClientTls& tls,
                                 const ScaleDrillOptions& options) {
  const auto t0 = SteadyClock::now();
  ScaleDrillReport report;
  report.endpoints = static_cast<int>(members.size());
  report.dataset = options.dataset;
  report.interval_seconds = options.interval_seconds > 0 ? options.interval_seconds : 1.0;
  const client::Orchestrator orch(tls, options.retry);
  const auto dir = normalize_path("/drill");
  const auto& ds = options.dataset;
  auto file_path = [](int k) {
    char name[32];
    std::snprintf(name, sizeof name, "/drill/file-%04d.dat", k);
    return std::string(name);
  };

  struct Event {
    double at;
    std::uint64_t bytes;
  };
  std::mutex mu;
  std::vector<Event> events;
  std::vector<std::string> expected(ds.file_count);

  auto finish = [&] {
    report.duration_seconds = seconds_since(t0);
    const auto buckets = static_cast<std::size_t>(std::ceil(report.duration_seconds / report.interval_seconds));
    report.intervals.resize(std::max<std::size_t>(buckets, events.empty() ? 0 : 1));
    for (std::size_t i = 0; i < report.intervals.size(); ++i) {
      report.intervals[i].start_seconds = static_cast<double>(i) * report.interval_seconds;
    }
    for (const auto& e : events) {
      auto idx = static_cast<std::size_t>(e.at / report.interval_seconds);
      idx = std::min(idx, report.intervals.size() - 1);
      report.intervals[idx].bytes += e.bytes;
      ++report.intervals[idx].transfers;
    }
    return report;
  };

  if (members.empty()) return finish();
  CycleResult seeding;
  try {
    const auto tok = orch.acquire_token(members[0].base_url, {Scope{Activity::kManage, dir}}, members[0].credential);
    for (int k = 0; k < ds.file_count; ++k) {
      const auto data = dataset_bytes(ds.seed, static_cast<std::uint64_t>(k), ds.file_size_bytes);
      expected[k] = to_hex(sha256(data));
      client::upload(join_url(members[0].base_url, file_path(k)), data, tok, tls);
    }
  } catch (const std::exception& e) {
    seeding.abort_error = as_error(e);
    report.cycles.push_back(seeding);
    return finish();
  }

  for (int cycle = 1; cycle <= options.cycles; ++cycle) {
    const auto c0 = SteadyClock::now();
    CycleResult result;
    result.cycle = cycle;
    std::atomic<bool> abort{false};
    std::vector<std::thread> pools;
    std::vector<std::vector<bool>> replicated(members.size(), std::vector<bool>(ds.file_count, false));
    for (std::size_t d = 1; d < members.size(); ++d) {
      pools.emplace_back([&, d] {
        run_pool(static_cast<std::size_t>(ds.file_count), options.concurrency_per_destination, [&](std::size_t k) {
          if (abort) return;
          client::TransferSpec spec;
          spec.source_url = join_url(members[0].base_url, file_path(static_cast<int>(k)));
          spec.destination_url = join_url(members[d].base_url, file_path(static_cast<int>(k)));
          spec.preferred_mode = client::ModePreference::kPull;
          spec.overwrite = true;
          spec.attempt_budget = options.attempt_budget;
          const auto r = orch.third_party_copy(spec, {members[0].credential, members[d].credential});
          std::lock_guard lock(mu);
          result.retries += std::max(r.attempts - 1, 0);
          std::optional<TpcError> error = r.error;
          if (r.succeeded && r.destination_digest != expected[k]) {
            error = TpcError{ErrorKind::kRemoteFailure, "digest mismatch for " + spec.destination_url, std::nullopt};
          }
          if (r.succeeded) replicated[d][k] = true;
          if (error) {
            ++result.transfers_failed;
            if (!result.abort_error) result.abort_error = error;
            abort = true;
            return;
          }
          ++result.transfers_succeeded;
          ++result.digests_verified;
          result.bytes_moved += ds.file_size_bytes;
          events.push_back({seconds_since(t0), ds.file_size_bytes});
        });
      });
    }
    for (auto& p : pools) p.join();

    for (std::size_t d = 1; d < members.size(); ++d) {
      try {
        const auto tok = orch.acquire_token(members[d].base_url, {Scope{Activity::kDelete, dir}}, members[d].credential);
        for (int k = 0; k < ds.file_count; ++k) {
          if (!replicated[d][k]) continue;
          client::delete_object(join_url(members[d].base_url, file_path(k)), tok, tls);
          ++result.replicas_deleted;
        }
      } catch (const std::exception& e) {
        if (!result.abort_error) result.abort_error = as_error(e);
      }
    }
    result.duration_seconds = seconds_since(c0);
    spdlog::info("scale drill cycle {}: {} transfers, {} bytes, {} retries", cycle, result.transfers_succeeded,
                 result.bytes_moved, result.retries);
    const bool stop = result.abort_error.has_value();
    report.cycles.push_back(result);
    if (stop) break;
  }
  return finish();
}

}  // namespace httptpc::harness
