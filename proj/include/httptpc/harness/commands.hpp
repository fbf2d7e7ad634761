#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "httptpc/client/orchestrator.hpp"
#include "httptpc/endpoint/config.hpp"

namespace httptpc::harness {

inline constexpr std::string_view kReportSchemaVersion = "1";

/// Deterministic pseudo-random content: equal arguments give equal bytes.
std::string dataset_bytes(std::uint64_t seed, std::uint64_t index, std::uint64_t size);

struct DatasetSpec {
  int file_count = 16;
  std::uint64_t file_size_bytes = 4ull << 20;
  std::uint64_t seed = 1;
};

/// An endpoint as the harness drives it: where it is and how to obtain
/// tokens there.
struct MeshMember {
  std::string base_url;
  client::ClientCredential credential;
};

/// Either in-process endpoints to spawn or remote ones to drive.
struct MeshConfig {
  std::vector<endpoint::EndpointConfig> endpoints;
  std::vector<MeshMember> remote;
  std::string ca_file;  // trust anchor for remote members
  DatasetSpec dataset;
};

/// Throws TpcException(kBadRequest) naming the offending field.
MeshConfig mesh_config_from_json(const nlohmann::json& doc);
MeshConfig load_mesh_config(const std::string& file);

// ---- smoke ------------------------------------------------------------

enum class StepStatus { kPass, kFail, kSkipped };
std::string_view to_string(StepStatus status) noexcept;

struct StepResult {
  std::string name;
  StepStatus status = StepStatus::kSkipped;
  std::string detail;
  double duration_seconds = 0.0;
};

struct SmokeOptions {
  MeshMember target;
  net::ClientTls tls;
  /// Loopback partner for the COPY steps. When unset the harness spawns
  /// one with its own ephemeral CA, which the target must trust.
  std::optional<MeshMember> peer;
  std::string prefix = "/smoke";
  std::uint64_t seed = 1;
  std::uint64_t upload_bytes = 1ull << 20;
};

struct SmokeReport {
  std::string endpoint;
  std::vector<StepResult> steps;
  double duration_seconds = 0.0;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Runs every step in order; never throws.
SmokeReport cmd_smoke(const SmokeOptions& options);

// ---- matrix -----------------------------------------------------------

struct MatrixCell {
  std::size_t source = 0;
  std::size_t destination = 0;
  TransferMode mode = TransferMode::kPull;
  bool succeeded = false;
  double duration_seconds = 0.0;
  std::uint64_t bytes = 0;
  bool digests_match = false;
  std::optional<TpcError> error;
};

struct MatrixReport {
  std::vector<std::string> endpoints;
  std::vector<MatrixCell> cells;  // ordered by source, destination, mode
  double duration_seconds = 0.0;
  int succeeded() const;
  int failed() const;
  nlohmann::json to_json() const;
  /// Source rows by destination columns, each cell "PULL/PUSH" outcomes.
  std::string render_table() const;
};

struct MatrixOptions {
  std::uint64_t file_size_bytes = 1ull << 20;
  std::uint64_t seed = 1;
  int workers = 4;
  int attempt_budget = 1;
};

MatrixReport cmd_matrix(const std::vector<MeshMember>& members, const net::ClientTls& tls,
                        const MatrixOptions& options = {});

// ---- scale drill ------------------------------------------------------

struct ScaleDrillOptions {
  DatasetSpec dataset;
  int cycles = 2;
  int concurrency_per_destination = 4;
  double interval_seconds = 1.0;
  int attempt_budget = 3;
  client::RetryPolicy retry;
};

struct CycleResult {
  int cycle = 0;
  int transfers_succeeded = 0;
  int transfers_failed = 0;
  int retries = 0;
  std::uint64_t bytes_moved = 0;
  int digests_verified = 0;
  int replicas_deleted = 0;
  double duration_seconds = 0.0;
  std::optional<TpcError> abort_error;  // first unrecoverable failure
};

struct IntervalSample {
  double start_seconds = 0.0;
  std::uint64_t bytes = 0;
  int transfers = 0;
};

struct ScaleDrillReport {
  int endpoints = 0;
  DatasetSpec dataset;
  std::vector<CycleResult> cycles;
  std::vector<IntervalSample> intervals;
  double interval_seconds = 1.0;
  double duration_seconds = 0.0;
  int transfers_succeeded() const;
  int transfers_failed() const;
  std::uint64_t bytes_moved() const;
  bool passed() const;
  nlohmann::json to_json() const;
};

/// Seeds the dataset on members[0], then per cycle replicates every file to
/// every other member by pull, verifies digests and deletes the replicas.
ScaleDrillReport cmd_scale_drill(const std::vector<MeshMember>& members, const net::ClientTls& tls,
                                 const ScaleDrillOptions& options);

}  // namespace httptpc::harness
