#include <gtest/gtest.h>

#include <chrono>
#include <random>
#include <set>
#include <thread>

#include "httptpc/client/orchestrator.hpp"
#include "httptpc/core/encoding.hpp"
#include "httptpc/harness/mesh.hpp"

namespace httptpc {
namespace {

using client::ModePreference;
using client::Orchestrator;
using client::TransferSpec;
using harness::Mesh;
using harness::MeshOptions;

MeshOptions options(int n) {
  MeshOptions o;
  o.endpoints = n;
  o.base.token_root_key = "placeholder";
  o.base.marker_period = 0.2;
  o.base.remote_timeout = 5;
  return o;
}

client::RetryPolicy quick_retry() {
  client::RetryPolicy p;
  p.base_delay = 0.05;
  p.max_delay = 0.2;
  p.seed = 11;
  return p;
}

std::string random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::string out(n, '\0');
  for (auto& c : out) c = static_cast<char>(rng() & 0xff);
  return out;
}

TransferSpec spec_for(Mesh& mesh, std::size_t src, std::size_t dst, const std::string& path,
                      ModePreference mode = ModePreference::kAuto) {
  TransferSpec s;
  s.source_url = mesh.url(src, path);
  s.destination_url = mesh.url(dst, path);
  s.preferred_mode = mode;
  return s;
}

TEST(Orchestrator, AcquireToken) {
  auto opts = options(1);
  opts.base.token_service.clients.push_back({"narrow", "pw", {}, {parse_scope("DOWNLOAD:/pub")}});
  Mesh mesh(opts);
  Orchestrator orch(mesh.client_tls());
  const auto tok = orch.acquire_token(mesh.url(0, "/"), {parse_scope("UPLOAD:/x")}, mesh.credential());
  EXPECT_FALSE(tok.empty());

  client::ClientCredential narrow{"narrow", "pw", std::nullopt};
  EXPECT_NO_THROW(orch.acquire_token(mesh.url(0, "/"), {parse_scope("DOWNLOAD:/pub/a")}, narrow));
  try {
    orch.acquire_token(mesh.url(0, "/"), {parse_scope("UPLOAD:/pub")}, narrow);
    ADD_FAILURE();
  } catch (const TpcException& e) {
    EXPECT_EQ(e.error().kind, ErrorKind::kForbidden);
  }
  client::ClientCredential wrong{"narrow", "bad", std::nullopt};
  try {
    orch.acquire_token(mesh.url(0, "/"), {parse_scope("DOWNLOAD:/pub")}, wrong);
    ADD_FAILURE();
  } catch (const TpcException& e) {
    EXPECT_EQ(e.error().kind, ErrorKind::kUnauthorized);
  }

  // Certificate credentials: the subject is the client id.
  auto cert_opts = options(1);
  cert_opts.base.token_service.clients.push_back(
      {"robot", "", {"CN=robot"}, {parse_scope("LIST:/")}});
  Mesh cert_mesh(cert_opts);
  client::ClientCredential by_cert{"", "", cert_mesh.ca().issue_client("robot")};
  EXPECT_NO_THROW(Orchestrator(cert_mesh.client_tls())
                      .acquire_token(cert_mesh.url(0, "/"), {parse_scope("LIST:/")}, by_cert));

  auto off = options(1);
  off.base.token_service.enabled = false;
  Mesh dark(off);
  try {
    Orchestrator(dark.client_tls()).acquire_token(dark.url(0, "/"), {parse_scope("LIST:/")}, dark.credential());
    ADD_FAILURE();
  } catch (const TpcException& e) {
    EXPECT_EQ(e.error().kind, ErrorKind::kProtocolViolation);
  }
}

TEST(Orchestrator, AutoPrefersPullAndDigestsMatch) {
  Mesh mesh(options(2));
  const auto data = random_bytes(3 << 20, 5);
  mesh.at(0).store().put(normalize_path("/a/obj"), data, false);
  Orchestrator orch(mesh.client_tls(), quick_retry());
  auto spec = spec_for(mesh, 0, 1, "/a/obj");
  spec.streams = 3;
  const auto report = orch.third_party_copy(spec, mesh.credentials());
  ASSERT_TRUE(report.succeeded) << report.error->to_string();
  EXPECT_EQ(report.mode, TransferMode::kPull);
  EXPECT_EQ(report.active_endpoint, Url::parse(mesh.url(1, "/")).origin());
  EXPECT_EQ(report.attempts, 1);
  EXPECT_EQ(report.bytes, data.size());
  EXPECT_EQ(report.source_digest, to_hex(sha256(data)));
  EXPECT_EQ(report.destination_digest, report.source_digest);
  EXPECT_TRUE(markers_monotonic(report.markers));

  // Each endpoint only ever saw bearer tokens it minted itself.
  auto bearers = [](const endpoint::Endpoint& ep) {
    std::set<std::string> out;
    for (const auto& e : ep.request_log()) {
      if (e.authorization.rfind("Bearer ", 0) == 0) out.insert(e.authorization);
    }
    return out;
  };
  const auto seen0 = bearers(mesh.at(0));
  const auto seen1 = bearers(mesh.at(1));
  EXPECT_FALSE(seen0.empty());
  for (const auto& a : seen0) EXPECT_EQ(seen1.count(a), 0u);
  for (const auto& e : mesh.at(0).request_log()) EXPECT_TRUE(e.transfer_authorization.empty());

  // A second run without overwrite is refused by the destination.
  const auto again = orch.third_party_copy(spec, mesh.credentials());
  EXPECT_FALSE(again.succeeded);
  spec.overwrite = true;
  EXPECT_TRUE(orch.third_party_copy(spec, mesh.credentials()).succeeded);
}

TEST(Orchestrator, AutoFallsBackToPushWhenCopyIsDisabled) {
  Mesh mesh(options(1));
  auto cfg = mesh.at(0).config();
  cfg.copy_enabled = false;
  const auto dst = mesh.add(cfg);
  mesh.at(0).store().put(normalize_path("/f"), "fallback", false);
  Orchestrator orch(mesh.client_tls(), quick_retry());
  const auto report = orch.third_party_copy(spec_for(mesh, 0, dst, "/f"), mesh.credentials());
  ASSERT_TRUE(report.succeeded) << report.error->to_string();
  EXPECT_EQ(report.mode, TransferMode::kPush);
  EXPECT_EQ(report.attempts, 2);
  ASSERT_EQ(report.attempt_log.size(), 2u);
  EXPECT_EQ(report.attempt_log[0].error->remote_status, 405);
  EXPECT_EQ(mesh.at(dst).store().get(normalize_path("/f")).data, "fallback");

  // An explicit PULL does not fall back.
  mesh.at(0).store().put(normalize_path("/g"), "x", false);
  const auto pull = orch.third_party_copy(spec_for(mesh, 0, dst, "/g", ModePreference::kPull), mesh.credentials());
  EXPECT_FALSE(pull.succeeded);
  EXPECT_EQ(pull.attempts, 1);
}

TEST(Orchestrator, DeniedTokenFailsBeforeAnyCopy) {
  auto opts = options(2);
  Mesh mesh(opts);
  mesh.at(0).store().put(normalize_path("/secret/f"), "x", false);
  Orchestrator orch(mesh.client_tls(), quick_retry());
  auto creds = mesh.credentials();
  creds.source = {"nobody", "nothing", std::nullopt};
  const auto report = orch.third_party_copy(spec_for(mesh, 0, 1, "/secret/f"), creds);
  EXPECT_FALSE(report.succeeded);
  EXPECT_EQ(report.error->kind, ErrorKind::kUnauthorized);
  EXPECT_EQ(report.attempts, 0);
  EXPECT_TRUE(mesh.at(1).jobs().empty());
}

TEST(Orchestrator, RetriesServerErrorsWithinBudget) {
  Mesh mesh(options(2));
  mesh.at(0).store().put(normalize_path("/f"), "data", false);
  endpoint::FaultConfig f;
  f.get_error_rate = 1.0;
  mesh.at(0).set_faults(f);
  Orchestrator orch(mesh.client_tls(), quick_retry());
  auto spec = spec_for(mesh, 0, 1, "/f", ModePreference::kPull);
  spec.attempt_budget = 3;
  const auto report = orch.third_party_copy(spec, mesh.credentials());
  EXPECT_FALSE(report.succeeded);
  EXPECT_EQ(report.attempts, 3);
  EXPECT_EQ(report.error->kind, ErrorKind::kRemoteFailure);
  EXPECT_EQ(report.error->remote_status, 503);
  EXPECT_GT(report.attempt_log[0].backoff_seconds, 0.0);
  EXPECT_EQ(report.attempt_log[2].backoff_seconds, 0.0);

  // A 4xx from the remote is not retried.
  const auto missing = orch.third_party_copy(spec_for(mesh, 0, 1, "/none", ModePreference::kPull),
                                             mesh.credentials());
  EXPECT_EQ(missing.attempts, 1);
  EXPECT_EQ(missing.error->remote_status, 404);
}

TEST(Orchestrator, BackoffIsCappedWithEqualJitter) {
  client::RetryPolicy p;
  p.base_delay = 1;
  p.factor = 2;
  p.max_delay = 8;
  p.seed = 3;
  Orchestrator orch({}, p);
  const double nominal[] = {1, 2, 4, 8, 8, 8};
  for (int round = 0; round < 50; ++round) {
    for (int n = 1; n <= 6; ++n) {
      const double d = orch.backoff_delay(n);
      EXPECT_GE(d, nominal[n - 1] / 2);
      EXPECT_LE(d, nominal[n - 1]);
    }
  }
}

TEST(Orchestrator, StalledTransferTimesOutAndCancelsTheJob) {
  auto opts = options(2);
  opts.base.marker_period = 0.25;
  Mesh mesh(opts);
  mesh.at(0).store().put(normalize_path("/slow"), random_bytes(2 << 20, 9), false);
  endpoint::FaultConfig f;
  f.stall_after_bytes = 256 << 10;
  mesh.at(0).set_faults(f);
  Orchestrator orch(mesh.client_tls(), quick_retry());
  auto spec = spec_for(mesh, 0, 1, "/slow", ModePreference::kPull);
  spec.progress_timeout = 1.5;
  spec.attempt_budget = 1;
  spec.streams = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const auto report = orch.third_party_copy(spec, mesh.credentials());
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_FALSE(report.succeeded);
  EXPECT_EQ(report.error->kind, ErrorKind::kTimeout);
  // Token acquisition and the initial progress both fit in the slack.
  EXPECT_LT(elapsed, spec.progress_timeout + 0.25 + 1.5);

  bool cancelled = false;
  for (int i = 0; i < 50 && !cancelled; ++i) {
    const auto jobs = mesh.at(1).jobs();
    cancelled = !jobs.empty() && jobs.back().state == endpoint::JobState::kCancelled;
    if (!cancelled) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  EXPECT_TRUE(cancelled);
  EXPECT_THROW(mesh.at(1).store().stat(normalize_path("/slow")), TpcException);
}

TEST(Orchestrator, DirectDataAccess) {
  Mesh mesh(options(1));
  const auto tok = mesh.at(0).mint_token({parse_scope("MANAGE:/"), parse_scope("DOWNLOAD:/"),
                                          parse_scope("DELETE:/")});
  const auto data = random_bytes(100000, 1);
  EXPECT_EQ(client::upload(mesh.url(0, "/x"), data, tok, mesh.client_tls()), 201);
  EXPECT_EQ(client::upload(mesh.url(0, "/x"), data, tok, mesh.client_tls()), 204);
  const auto info = client::stat_object(mesh.url(0, "/x"), tok, mesh.client_tls());
  EXPECT_EQ(info.size, data.size());
  EXPECT_EQ(info.sha256_hex, to_hex(sha256(data)));
  const auto part = client::download(mesh.url(0, "/x"), tok, mesh.client_tls(), std::make_pair(10ull, 20ull));
  EXPECT_EQ(part.status, 206);
  EXPECT_EQ(part.data, data.substr(10, 10));
  client::delete_object(mesh.url(0, "/x"), tok, mesh.client_tls());
  try {
    client::stat_object(mesh.url(0, "/x"), tok, mesh.client_tls());
    ADD_FAILURE();
  } catch (const TpcException& e) {
    EXPECT_EQ(e.error().kind, ErrorKind::kNotFound);
  }
}

TEST(TransferReport, JsonShape) {
  client::TransferReport r;
  r.spec.source_url = "https://a/x";
  r.spec.destination_url = "https://b/x";
  r.error = TpcError{ErrorKind::kTimeout, "stalled", std::nullopt};
  const auto j = r.to_json();
  EXPECT_EQ(j["outcome"], "FAILED");
  EXPECT_EQ(j["error"]["kind"], "TIMEOUT");
  EXPECT_TRUE(j["error"]["remote_status"].is_null());
  EXPECT_TRUE(j["mode"].is_null());
  EXPECT_EQ(j["preferred_mode"], "AUTO");
}

}  // namespace
}  // namespace httptpc
