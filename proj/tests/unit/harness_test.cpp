#include <gtest/gtest.h>

#include "httptpc/core/encoding.hpp"
#include "httptpc/harness/commands.hpp"
#include "httptpc/harness/mesh.hpp"

namespace httptpc::harness {
namespace {

MeshOptions options(int n) {
  MeshOptions o;
  o.endpoints = n;
  o.base.token_root_key = "placeholder";
  o.base.marker_period = 0.2;
  o.base.remote_timeout = 5;
  return o;
}

std::vector<MeshMember> members_of(Mesh& mesh) {
  std::vector<MeshMember> out;
  for (std::size_t i = 0; i < mesh.size(); ++i) out.push_back({mesh.url(i, ""), mesh.credential()});
  return out;
}

TEST(Dataset, DeterministicPerSeedAndIndex) {
  EXPECT_EQ(dataset_bytes(1, 0, 1000), dataset_bytes(1, 0, 1000));
  EXPECT_NE(dataset_bytes(1, 0, 1000), dataset_bytes(2, 0, 1000));
  EXPECT_NE(dataset_bytes(1, 0, 1000), dataset_bytes(1, 1, 1000));
  // A shorter file is a prefix of a longer one with the same seed.
  EXPECT_EQ(dataset_bytes(5, 3, 1003), dataset_bytes(5, 3, 2000).substr(0, 1003));
  EXPECT_EQ(dataset_bytes(5, 3, 0), "");
}

TEST(Smoke, HealthyEndpointPassesEveryStep) {
  Mesh mesh(options(2));
  SmokeOptions o;
  o.target = {mesh.url(0, ""), mesh.credential()};
  o.peer = MeshMember{mesh.url(1, ""), mesh.credential()};
  o.tls = mesh.client_tls();
  const auto report = cmd_smoke(o);
  for (const auto& s : report.steps) EXPECT_EQ(s.status, StepStatus::kPass) << s.name << ": " << s.detail;
  EXPECT_TRUE(report.passed());
  const std::vector<std::string> names = {"discovery",      "token:UPLOAD", "token:DOWNLOAD", "token:DELETE",
                                          "token:MANAGE",   "token:LIST",   "upload",         "ranged-download",
                                          "pull-copy",      "push-copy",    "delete"};
  ASSERT_EQ(report.steps.size(), names.size());
  for (std::size_t i = 0; i < names.size(); ++i) EXPECT_EQ(report.steps[i].name, names[i]);
  const auto j = report.to_json();
  EXPECT_EQ(j["schema_version"], "1");
  EXPECT_EQ(j["steps"].size(), names.size());
  // Reruns are idempotent.
  EXPECT_TRUE(cmd_smoke(o).passed());
}

TEST(Smoke, SpawnsItsOwnPeerWhenNoneIsGiven) {
  auto opts = options(1);
  opts.base.tls.insecure_outbound = true;
  Mesh mesh(opts);
  SmokeOptions o;
  o.target = {mesh.url(0, ""), mesh.credential()};
  o.tls = mesh.client_tls();
  const auto report = cmd_smoke(o);
  for (const auto& s : report.steps) EXPECT_EQ(s.status, StepStatus::kPass) << s.name << ": " << s.detail;
}

TEST(Smoke, DisabledTokenServiceFailsAndSkips) {
  auto opts = options(2);
  Mesh mesh(opts);
  auto cfg = mesh.at(0).config();
  cfg.token_service.enabled = false;
  const auto dark = mesh.add(cfg);
  SmokeOptions o;
  o.target = {mesh.url(dark, ""), mesh.credential()};
  o.peer = MeshMember{mesh.url(1, ""), mesh.credential()};
  o.tls = mesh.client_tls();
  const auto report = cmd_smoke(o);
  EXPECT_FALSE(report.passed());
  for (const auto& s : report.steps) {
    if (s.name == "discovery" || s.name.rfind("token:", 0) == 0) {
      EXPECT_EQ(s.status, StepStatus::kFail) << s.name;
    } else {
      EXPECT_EQ(s.status, StepStatus::kSkipped) << s.name;
    }
  }
}

TEST(Matrix, HealthyMeshSucceedsEverywhereAndIsDeterministic) {
  Mesh mesh(options(3));
  MatrixOptions mo;
  mo.file_size_bytes = 256 << 10;
  const auto a = cmd_matrix(members_of(mesh), mesh.client_tls(), mo);
  ASSERT_EQ(a.cells.size(), 12u);
  for (const auto& c : a.cells) {
    EXPECT_TRUE(c.succeeded) << c.source << "->" << c.destination << " " << (c.error ? c.error->to_string() : "");
    EXPECT_TRUE(c.digests_match);
    EXPECT_EQ(c.bytes, mo.file_size_bytes);
  }
  const auto b = cmd_matrix(members_of(mesh), mesh.client_tls(), mo);
  ASSERT_EQ(b.cells.size(), a.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].source, b.cells[i].source);
    EXPECT_EQ(a.cells[i].destination, b.cells[i].destination);
    EXPECT_EQ(a.cells[i].mode, b.cells[i].mode);
    EXPECT_EQ(a.cells[i].succeeded, b.cells[i].succeeded);
  }
  const auto table = a.render_table();
  EXPECT_NE(table.find("12/12 cells succeeded"), std::string::npos);
  EXPECT_EQ(a.to_json()["summary"]["succeeded"], 12);
}

TEST(Matrix, CopyDisabledEndpointFailsOnlyWhereItIsActive) {
  Mesh mesh(options(2));
  auto cfg = mesh.at(0).config();
  cfg.copy_enabled = false;
  mesh.add(cfg);
  const std::size_t disabled = 2;
  MatrixOptions mo;
  mo.file_size_bytes = 64 << 10;
  const auto report = cmd_matrix(members_of(mesh), mesh.client_tls(), mo);
  ASSERT_EQ(report.cells.size(), 12u);
  int failures = 0;
  for (const auto& c : report.cells) {
    const std::size_t active = c.mode == TransferMode::kPull ? c.destination : c.source;
    EXPECT_EQ(c.succeeded, active != disabled) << c.source << "->" << c.destination << " " << to_string(c.mode);
    if (!c.succeeded) {
      ++failures;
      ASSERT_TRUE(c.error.has_value());
      EXPECT_EQ(c.error->remote_status, 405);
    }
  }
  EXPECT_EQ(failures, 4);
}

TEST(Matrix, SingleEndpointHasNoCells) {
  Mesh mesh(options(1));
  const auto report = cmd_matrix(members_of(mesh), mesh.client_tls());
  EXPECT_TRUE(report.cells.empty());
  EXPECT_EQ(report.failed(), 0);
}

TEST(ScaleDrill, ConservesBytesAndCleansUp) {
  Mesh mesh(options(3));
  ScaleDrillOptions o;
  o.dataset = {4, 256 << 10, 9};
  o.cycles = 2;
  o.interval_seconds = 0.5;
  const auto report = cmd_scale_drill(members_of(mesh), mesh.client_tls(), o);
  EXPECT_TRUE(report.passed());
  ASSERT_EQ(report.cycles.size(), 2u);
  for (const auto& c : report.cycles) {
    EXPECT_EQ(c.transfers_succeeded, 4 * 2);
    EXPECT_EQ(c.bytes_moved, 4ull * 2 * (256 << 10));
    EXPECT_EQ(c.digests_verified, 8);
    EXPECT_EQ(c.replicas_deleted, 8);
  }
  EXPECT_EQ(report.transfers_succeeded(), 16);
  std::uint64_t interval_bytes = 0;
  int interval_transfers = 0;
  for (const auto& s : report.intervals) {
    interval_bytes += s.bytes;
    interval_transfers += s.transfers;
  }
  EXPECT_EQ(interval_bytes, report.bytes_moved());
  EXPECT_EQ(interval_transfers, 16);
  // Replicas are gone, the originals remain.
  for (std::size_t d = 1; d < 3; ++d) EXPECT_TRUE(mesh.at(d).store().list(normalize_path("/")).empty());
  EXPECT_EQ(mesh.at(0).store().list(normalize_path("/drill")).size(), 4u);
}

TEST(ScaleDrill, ZeroCyclesOnlySeeds) {
  Mesh mesh(options(2));
  ScaleDrillOptions o;
  o.dataset = {3, 1000, 1};
  o.cycles = 0;
  const auto report = cmd_scale_drill(members_of(mesh), mesh.client_tls(), o);
  EXPECT_TRUE(report.cycles.empty());
  EXPECT_TRUE(report.passed());
  EXPECT_EQ(report.to_json()["totals"]["transfers_succeeded"], 0);
  EXPECT_EQ(mesh.at(0).store().list(normalize_path("/drill")).size(), 3u);
}

TEST(ScaleDrill, InjectedFailuresAreRetried) {
  Mesh mesh(options(4));
  endpoint::FaultConfig f;
  f.seed = 4;
  f.get_error_rate = 0.1;
  mesh.at(0).set_faults(f);
  ScaleDrillOptions o;
  o.dataset = {16, 32 << 10, 2};
  o.cycles = 1;
  o.attempt_budget = 3;
  o.retry.base_delay = 0.01;
  o.retry.max_delay = 0.05;
  const auto report = cmd_scale_drill(members_of(mesh), mesh.client_tls(), o);
  ASSERT_EQ(report.cycles.size(), 1u);
  EXPECT_TRUE(report.passed()) << (report.cycles[0].abort_error ? report.cycles[0].abort_error->to_string() : "");
  EXPECT_EQ(report.cycles[0].transfers_succeeded, 48);
  EXPECT_GT(report.cycles[0].retries, 0);
}

TEST(MeshConfig, ParsesAndNamesBadFields) {
  const auto ok = mesh_config_from_json(nlohmann::json::parse(R"({
    "endpoints": [{"pull_streams": 2}, {}],
    "dataset": {"file_count": 2, "file_size_bytes": 10, "seed": 3}
  })"));
  EXPECT_EQ(ok.endpoints.size(), 2u);
  EXPECT_EQ(ok.endpoints[0].pull_streams, 2);
  EXPECT_EQ(ok.dataset.file_count, 2);

  auto message = [](const char* text) {
    try {
      mesh_config_from_json(nlohmann::json::parse(text));
    } catch (const TpcException& e) {
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  EXPECT_NE(message(R"({"endpoints": [{"pull_streams": 0}]})").find("endpoints[0]: config: pull_streams"),
            std::string::npos);
  EXPECT_NE(message(R"({"dataset": {"file_count": 0}})").find("dataset.file_count"), std::string::npos);
  EXPECT_NE(message(R"({"remote": [{"base_url": "https://x"}]})").find("remote[0].client_id"), std::string::npos);
  EXPECT_NE(message(R"({"nodes": []})").find("nodes"), std::string::npos);
}

}  // namespace
}  // namespace httptpc::harness
