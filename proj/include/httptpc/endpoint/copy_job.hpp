#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "httptpc/core/error.hpp"
#include "httptpc/core/path.hpp"
#include "httptpc/core/perf_marker.hpp"
#include "httptpc/core/scope.hpp"
#include "httptpc/net/http_client.hpp"

namespace httptpc::endpoint {

enum class JobState { kPending, kRunning, kSucceeded, kFailed, kCancelled };

std::string_view to_string(JobState state) noexcept;
bool is_terminal(JobState state) noexcept;

struct JobSnapshot {
  std::uint64_t id = 0;
  TransferMode mode = TransferMode::kPull;
  std::string local_path;
  std::string remote_url;
  JobState state = JobState::kPending;
  std::optional<TpcError> failure;
  std::vector<std::uint64_t> stripe_bytes;
  std::optional<std::uint64_t> size;
  std::int64_t created_at = 0;
  std::optional<std::int64_t> started_at;
  std::optional<std::int64_t> finished_at;

  std::uint64_t bytes_done() const noexcept;
  nlohmann::json to_json() const;
};

/// One COPY in flight. Progress counters are written by fetch workers and
/// read by the marker emitter; state changes wake waiters.
class CopyJob {
 public:
  CopyJob(std::uint64_t id, TransferMode mode, VirtualPath local_path, Url remote_url,
          net::HeaderList forwarded_headers, bool overwrite, int streams);

  std::uint64_t id() const noexcept { return id_; }
  TransferMode mode() const noexcept { return mode_; }
  const VirtualPath& local_path() const noexcept { return local_path_; }
  const Url& remote_url() const noexcept { return remote_url_; }
  const net::HeaderList& forwarded_headers() const noexcept { return forwarded_; }
  bool overwrite() const noexcept { return overwrite_; }
  int streams() const noexcept { return streams_; }

  JobState state() const;
  /// Enforces PENDING -> RUNNING -> {SUCCEEDED, FAILED, CANCELLED}.
  void start();
  void succeed();
  void fail(TpcError error);
  void finish_cancelled();

  void set_layout(std::uint64_t size, std::uint32_t stripes);
  void add_progress(std::uint32_t stripe, std::uint64_t bytes);
  /// Raises a stripe's counter to at least `bytes` (never lowers it).
  void raise_progress(std::uint32_t stripe, std::uint64_t bytes);

  /// Markers for the current instant: one per stripe, or a single
  /// zero-byte marker while the layout is unknown.
  std::vector<PerfMarker> markers(std::int64_t now) const;
  JobSnapshot snapshot() const;

  /// Aborts the transfer because the orchestrator went away.
  void cancel();
  bool cancel_requested() const noexcept { return cancel_requested_.load(); }
  /// Aborts sibling stripes after one of them failed.
  void abort_transfer() { cancellation_.cancel(); }
  net::Cancellation& cancellation() noexcept { return cancellation_; }

  /// Waits until the job is terminal or `deadline` passes.
  bool wait_terminal_until(std::chrono::steady_clock::time_point deadline) const;

 private:
  void transition(JobState from, JobState to);

  const std::uint64_t id_;
  const TransferMode mode_;
  const VirtualPath local_path_;
  const Url remote_url_;
  const net::HeaderList forwarded_;
  const bool overwrite_;
  const int streams_;

  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  JobState state_ = JobState::kPending;
  std::optional<TpcError> failure_;
  std::vector<std::uint64_t> stripes_;
  std::optional<std::uint64_t> size_;
  std::int64_t created_at_;
  std::optional<std::int64_t> started_at_;
  std::optional<std::int64_t> finished_at_;

  std::atomic<bool> cancel_requested_{false};
  net::Cancellation cancellation_;
};

/// FIFO admission with a fixed number of RUNNING slots.
class AdmissionQueue {
 public:
  explicit AdmissionQueue(int slots) : slots_(slots) {}

  /// Blocks until `job` reaches the head of the queue and a slot is free.
  /// Returns false when the job was cancelled while queued.
  bool acquire(const CopyJob& job);
  void release();

  int running() const;
  int max_running_observed() const;
  int slots() const noexcept { return slots_; }

 private:
  const int slots_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::uint64_t> queue_;
  int running_ = 0;
  int max_observed_ = 0;
};

std::int64_t unix_now();

}  // namespace httptpc::endpoint
