// httptpc: endpoint server and conformance harness front end.
//
// Exit codes: 0 everything passed, 1 a functional failure, 2 a usage or
// configuration error.

#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "httptpc/core/encoding.hpp"
#include "httptpc/endpoint/endpoint.hpp"
#include "httptpc/harness/commands.hpp"
#include "httptpc/harness/mesh.hpp"
#include "httptpc/net/signals.hpp"
#include "httptpc/net/tls.hpp"
#include "httptpc/token/token.hpp"

namespace {

using namespace httptpc;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Globals {
  std::string config;
  std::string json_out;
  bool insecure_tls = false;
  std::uint64_t seed = 1;
  bool verbose = false;
};

/// Thrown for usage and configuration problems.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void emit_json(const Globals& g, const json& report) {
  if (g.json_out.empty()) return;
  const std::string text = report.dump(2) + "\n";
  if (g.json_out == "-") {
    std::cout << text;
    return;
  }
  net::write_text_file(g.json_out, text);
}

/// Human output goes to stdout unless the JSON report already does.
std::ostream& human(const Globals& g) {
  return g.json_out == "-" ? std::cerr : std::cout;
}

std::string read_or_usage(const std::string& file) {
  try {
    return net::read_text_file(file);
  } catch (const TpcException& e) {
    throw UsageError(e.error().detail);
  }
}

/// Members to drive: remote ones from the config, otherwise an in-process
/// mesh of `count` endpoints (kept alive through `mesh`).
struct Targets {
  std::unique_ptr<harness::Mesh> mesh;
  std::vector<harness::MeshMember> members;
  net::ClientTls tls;
  harness::DatasetSpec dataset;
};

Targets resolve_targets(const Globals& g, int count) {
  Targets t;
  harness::MeshConfig cfg;
  if (!g.config.empty()) {
    try {
      cfg = harness::load_mesh_config(g.config);
    } catch (const TpcException& e) {
      throw UsageError(e.error().detail);
    }
  }
  t.dataset = cfg.dataset;
  if (!cfg.remote.empty()) {
    t.members = cfg.remote;
    if (!cfg.ca_file.empty()) t.tls.ca_pem = read_or_usage(cfg.ca_file);
    t.tls.insecure = g.insecure_tls;
    return t;
  }
  harness::MeshOptions opts;
  opts.seed = g.seed;
  opts.base.token_root_key = "assigned-by-mesh";
  opts.endpoints = cfg.endpoints.empty() ? count : 0;
  t.mesh = std::make_unique<harness::Mesh>(opts);
  for (const auto& ep : cfg.endpoints) t.mesh->add(ep);
  for (std::size_t i = 0; i < t.mesh->size(); ++i) t.members.push_back({t.mesh->url(i, ""), t.mesh->credential()});
  t.tls = t.mesh->client_tls();
  return t;
}

// ---- serve --------------------------------------------------------------

int run_serve(const Globals& g) {
  if (g.config.empty()) throw UsageError("serve requires --config <endpoint config file>");
  endpoint::EndpointConfig config;
  endpoint::EndpointTls tls;
  try {
    config = endpoint::load_endpoint_config(g.config);
    tls = endpoint::load_endpoint_tls(config);
  } catch (const TpcException& e) {
    throw UsageError(e.error().detail);
  }
  if (g.insecure_tls) tls.outbound.insecure = true;

  // Signals are taken synchronously below; block them before any worker
  // thread exists so every thread inherits the mask.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  endpoint::Endpoint ep(config, tls);
  try {
    ep.start();
  } catch (const std::system_error& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  std::cout << "listening on " << ep.base_url() << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  spdlog::info("signal {} received, shutting down", sig);
  ep.stop();
  return kExitOk;
}

// ---- smoke --------------------------------------------------------------

struct SmokeArgs {
  std::string endpoint;
  std::string client_id = "harness";
  std::string client_secret;
  std::string ca_file;
  std::string prefix = "/smoke";
  std::uint64_t upload_bytes = 1ull << 20;
};

int run_smoke(const Globals& g, const SmokeArgs& a) {
  harness::SmokeOptions o;
  o.prefix = a.prefix;
  o.seed = g.seed;
  o.upload_bytes = a.upload_bytes;
  std::unique_ptr<harness::Mesh> mesh;
  if (a.endpoint.empty()) {
    harness::MeshOptions mo;
    mo.endpoints = 2;
    mo.seed = g.seed;
    mo.base.token_root_key = "assigned-by-mesh";
    mesh = std::make_unique<harness::Mesh>(mo);
    o.target = {mesh->url(0, ""), mesh->credential()};
    o.peer = harness::MeshMember{mesh->url(1, ""), mesh->credential()};
    o.tls = mesh->client_tls();
  } else {
    o.target = {a.endpoint, {a.client_id, a.client_secret, std::nullopt}};
    if (!a.ca_file.empty()) o.tls.ca_pem = read_or_usage(a.ca_file);
    o.tls.insecure = g.insecure_tls;
  }
  const auto report = harness::cmd_smoke(o);
  auto& out = human(g);
  out << "smoke " << report.endpoint << "\n";
  for (const auto& s : report.steps) {
    char line[64];
    std::snprintf(line, sizeof line, "  %-16s %-7s ", s.name.c_str(), std::string(to_string(s.status)).c_str());
    out << line << s.detail << "\n";
  }
  out << (report.passed() ? "PASS" : "FAIL") << " in " << report.duration_seconds << " s\n";
  emit_json(g, report.to_json());
  return report.passed() ? kExitOk : kExitFailure;
}

// ---- matrix -------------------------------------------------------------

int run_matrix(const Globals& g, int endpoints, std::uint64_t file_size) {
  auto t = resolve_targets(g, endpoints);
  harness::MatrixOptions o;
  o.seed = g.seed;
  o.file_size_bytes = file_size;
  const auto report = harness::cmd_matrix(t.members, t.tls, o);
  human(g) << report.render_table();
  emit_json(g, report.to_json());
  return report.failed() == 0 ? kExitOk : kExitFailure;
}

// ---- scale drill --------------------------------------------------------

struct DrillArgs {
  int endpoints = 4;
  std::optional<int> files;
  std::optional<std::uint64_t> file_size;
  int cycles = 2;
  int concurrency = 4;
  double interval = 1.0;
  int attempt_budget = 3;
};

int run_scale_drill(const Globals& g, const DrillArgs& a) {
  auto t = resolve_targets(g, a.endpoints);
  harness::ScaleDrillOptions o;
  o.dataset = t.dataset;
  if (g.config.empty()) o.dataset.seed = g.seed;
  if (a.files) o.dataset.file_count = *a.files;
  if (a.file_size) o.dataset.file_size_bytes = *a.file_size;
  if (o.dataset.file_count < 1) throw UsageError("--files must be >= 1");
  o.cycles = a.cycles;
  o.concurrency_per_destination = a.concurrency;
  o.interval_seconds = a.interval;
  o.attempt_budget = a.attempt_budget;
  o.retry.seed = g.seed;
  const auto report = harness::cmd_scale_drill(t.members, t.tls, o);
  auto& out = human(g);
  for (const auto& c : report.cycles) {
    out << "cycle " << c.cycle << ": " << c.transfers_succeeded << " transfers, " << c.bytes_moved << " bytes, "
        << c.retries << " retries, " << c.duration_seconds << " s";
    if (c.abort_error) out << ", aborted: " << c.abort_error->to_string();
    out << "\n";
  }
  out << "total: " << report.transfers_succeeded() << " transfers, " << report.bytes_moved() << " bytes in "
      << report.duration_seconds << " s\n";
  emit_json(g, report.to_json());
  return report.passed() ? kExitOk : kExitFailure;
}

// ---- token --------------------------------------------------------------

json describe(const token::TransferToken& t) {
  json caveats = json::array();
  for (const auto& c : t.caveats) caveats.push_back(c);
  return {{"issuer_location", t.issuer_location},
          {"key_id", t.key_id},
          {"caveats", caveats},
          {"signature", to_hex(t.signature)}};
}

token::TransferToken parse_or_usage(const std::string& text) {
  try {
    return token::parse_token(text);
  } catch (const TpcException& e) {
    throw UsageError("token: " + e.error().detail);
  }
}

struct TokenArgs {
  std::string key;
  std::string key_id = "k1";
  std::string issuer = "https://localhost";
  std::vector<std::string> scopes;
  std::vector<std::string> caveats;
  std::int64_t lifetime = 3600;
  std::string token;
  std::string audience;
  std::optional<std::int64_t> now;
};

int run_token_mint(const Globals& g, const TokenArgs& a) {
  if (a.scopes.empty()) throw UsageError("mint needs at least one --scope");
  std::vector<std::string> caveats;
  try {
    for (const auto& s : a.scopes) caveats.push_back(token::scope_caveat(parse_scope(s)));
  } catch (const TpcException& e) {
    throw UsageError(e.error().detail);
  }
  caveats.push_back(token::before_caveat(a.now.value_or(endpoint::unix_now()) + a.lifetime));
  if (!a.audience.empty()) caveats.push_back(token::audience_caveat(a.audience));
  const auto t = token::mint(token::key_bytes(a.key), a.issuer, a.key_id, caveats);
  std::cout << token::serialize_token(t) << "\n";
  emit_json(g, describe(t));
  return kExitOk;
}

int run_token_verify(const Globals& g, const TokenArgs& a) {
  if (a.scopes.size() != 1) throw UsageError("verify needs exactly one --scope ACTIVITY:PATH");
  Scope needed;
  try {
    needed = parse_scope(a.scopes.front());
  } catch (const TpcException& e) {
    throw UsageError(e.error().detail);
  }
  const auto r = token::verify(a.token, token::key_bytes(a.key), a.now.value_or(endpoint::unix_now()), needed,
                               a.audience);
  std::cout << (r.pass ? "PASS" : "FAIL " + std::string(token::to_string(r.reason)) + ": " + r.detail) << "\n";
  emit_json(g, {{"pass", r.pass},
                {"reason", r.pass ? json(nullptr) : json(std::string(token::to_string(r.reason)))},
                {"detail", r.detail}});
  return r.pass ? kExitOk : kExitFailure;
}

int run_token_attenuate(const Globals& g, const TokenArgs& a) {
  const auto t = parse_or_usage(a.token);
  std::vector<std::string> group;
  try {
    for (const auto& s : a.scopes) group.push_back(token::scope_caveat(parse_scope(s)));
    for (const auto& c : a.caveats) group.push_back(c);
    if (group.empty()) throw UsageError("attenuate needs --scope or --caveat");
    const auto out = token::attenuate(t, group);
    std::cout << token::serialize_token(out) << "\n";
    emit_json(g, describe(out));
  } catch (const TpcException& e) {
    throw UsageError(e.error().detail);
  }
  return kExitOk;
}

int run_token_inspect(const Globals& g, const TokenArgs& a) {
  const auto d = describe(parse_or_usage(a.token));
  std::cout << d.dump(2) << "\n";
  emit_json(g, d);
  return kExitOk;
}

void setup_logging(bool verbose, bool serving) {
  auto logger = spdlog::stderr_color_mt("httptpc");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose || serving ? spdlog::level::info : spdlog::level::warn);
}

}  // namespace

int main(int argc, char** argv) {
  net::ignore_sigpipe();
  Globals g;
  CLI::App app{"HTTP third-party-copy endpoint and conformance harness"};
  app.require_subcommand(1);
  // Global options may also follow the subcommand.
  app.fallthrough();
  app.add_option("--config", g.config, "endpoint config (serve) or mesh config (matrix, scale-drill)");
  app.add_option("--json", g.json_out, "write the JSON report to this file ('-' for stdout)");
  app.add_flag("--insecure-tls", g.insecure_tls, "skip server certificate checks (test meshes only)");
  app.add_option("--seed", g.seed, "seed for generated content and jitter");
  app.add_flag("-v,--verbose", g.verbose, "log progress to stderr");

  auto* serve = app.add_subcommand("serve", "run one endpoint until SIGINT or SIGTERM");

  SmokeArgs smoke_args;
  auto* smoke = app.add_subcommand("smoke", "discovery, tokens, upload, ranged download, COPY both ways, delete");
  smoke->add_option("--endpoint", smoke_args.endpoint, "base URL to test (default: an in-process endpoint)");
  smoke->add_option("--client-id", smoke_args.client_id, "token client id");
  smoke->add_option("--client-secret", smoke_args.client_secret, "token client secret");
  smoke->add_option("--ca", smoke_args.ca_file, "PEM bundle trusted for the endpoint");
  smoke->add_option("--prefix", smoke_args.prefix, "namespace used for test objects");
  smoke->add_option("--upload-bytes", smoke_args.upload_bytes, "size of the uploaded object");

  int matrix_endpoints = 3;
  std::uint64_t matrix_file_size = 1ull << 20;
  auto* matrix = app.add_subcommand("matrix", "PULL and PUSH between every ordered pair of endpoints");
  matrix->add_option("--endpoints", matrix_endpoints, "in-process mesh size when no --config is given")
      ->check(CLI::Range(1, 64));
  matrix->add_option("--file-size", matrix_file_size, "bytes per seeded file");

  DrillArgs drill_args;
  auto* drill = app.add_subcommand("scale-drill", "upload, replicate everywhere, delete; repeat");
  drill->add_option("--endpoints", drill_args.endpoints, "in-process mesh size when no --config is given")
      ->check(CLI::Range(1, 64));
  drill->add_option("--files", drill_args.files, "files in the dataset");
  drill->add_option("--file-size", drill_args.file_size, "bytes per file");
  drill->add_option("--cycles", drill_args.cycles, "replicate/delete cycles")->check(CLI::NonNegativeNumber);
  drill->add_option("--concurrency", drill_args.concurrency, "simultaneous transfers per destination")
      ->check(CLI::PositiveNumber);
  drill->add_option("--interval", drill_args.interval, "throughput bucket width in seconds")
      ->check(CLI::PositiveNumber);
  drill->add_option("--attempt-budget", drill_args.attempt_budget, "COPY attempts per transfer")
      ->check(CLI::PositiveNumber);

  TokenArgs token_args;
  auto* tok = app.add_subcommand("token", "mint, verify, attenuate or inspect transfer tokens");
  tok->require_subcommand(1);
  auto* mint = tok->add_subcommand("mint", "mint a token from a root key");
  mint->add_option("--key", token_args.key, "root key")->required();
  mint->add_option("--key-id", token_args.key_id, "key identifier");
  mint->add_option("--issuer", token_args.issuer, "issuer location");
  mint->add_option("--scope", token_args.scopes, "ACTIVITY:PATH (repeatable)")->required();
  mint->add_option("--lifetime", token_args.lifetime, "seconds")->check(CLI::PositiveNumber);
  mint->add_option("--audience", token_args.audience, "bind to this endpoint URL");
  mint->add_option("--now", token_args.now, "Unix time to mint at");
  auto* verify = tok->add_subcommand("verify", "check a token against one needed scope");
  verify->add_option("--key", token_args.key, "root key")->required();
  verify->add_option("--token", token_args.token, "serialized token")->required();
  verify->add_option("--scope", token_args.scopes, "needed ACTIVITY:PATH")->required();
  verify->add_option("--audience", token_args.audience, "this endpoint's URL");
  verify->add_option("--now", token_args.now, "Unix time to verify at");
  auto* atten = tok->add_subcommand("attenuate", "append one caveat group");
  atten->add_option("--token", token_args.token, "serialized token")->required();
  atten->add_option("--scope", token_args.scopes, "ACTIVITY:PATH (repeatable, one group)");
  atten->add_option("--caveat", token_args.caveats, "raw caveat text (repeatable, same group)");
  auto* inspect = tok->add_subcommand("inspect", "decode without verifying");
  inspect->add_option("--token", token_args.token, "serialized token")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  setup_logging(g.verbose, serve->parsed());
  try {
    if (serve->parsed()) return run_serve(g);
    if (smoke->parsed()) return run_smoke(g, smoke_args);
    if (matrix->parsed()) return run_matrix(g, matrix_endpoints, matrix_file_size);
    if (drill->parsed()) return run_scale_drill(g, drill_args);
    if (mint->parsed()) return run_token_mint(g, token_args);
    if (verify->parsed()) return run_token_verify(g, token_args);
    if (atten->parsed()) return run_token_attenuate(g, token_args);
    if (inspect->parsed()) return run_token_inspect(g, token_args);
  } catch (const UsageError& e) {
    std::cerr << "httptpc: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "httptpc: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
