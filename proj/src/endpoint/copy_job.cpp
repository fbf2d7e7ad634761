#include "httptpc/endpoint/copy_job.hpp"

#include <algorithm>
#include <numeric>

namespace httptpc::endpoint {

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string_view to_string(JobState state) noexcept {
  switch (state) {
    case JobState::kPending: return "PENDING";
    case JobState::kRunning: return "RUNNING";
    case JobState::kSucceeded: return "SUCCEEDED";
    case JobState::kFailed: return "FAILED";
    case JobState::kCancelled: return "CANCELLED";
  }
  return "?";
}

bool is_terminal(JobState state) noexcept {
  return state == JobState::kSucceeded || state == JobState::kFailed || state == JobState::kCancelled;
}

std::uint64_t JobSnapshot::bytes_done() const noexcept {
  return std::accumulate(stripe_bytes.begin(), stripe_bytes.end(), std::uint64_t{0});
}

nlohmann::json JobSnapshot::to_json() const {
  nlohmann::json j = {
      {"id", id},
      {"mode", std::string(httptpc::to_string(mode))},
      {"local_path", local_path},
      {"remote_url", remote_url},
      {"state", std::string(endpoint::to_string(state))},
      {"stripe_bytes", stripe_bytes},
      {"total_stripe_count", stripe_bytes.empty() ? 0 : stripe_bytes.size()},
      {"bytes_done", bytes_done()},
      {"created_at", created_at},
  };
  j["size"] = size ? nlohmann::json(*size) : nlohmann::json(nullptr);
  j["started_at"] = started_at ? nlohmann::json(*started_at) : nlohmann::json(nullptr);
  j["finished_at"] = finished_at ? nlohmann::json(*finished_at) : nlohmann::json(nullptr);
  j["failure"] = failure ? nlohmann::json(failure->to_string()) : nlohmann::json(nullptr);
  return j;
}

CopyJob::CopyJob(std::uint64_t id, TransferMode mode, VirtualPath local_path, Url remote_url,
                 net::HeaderList forwarded_headers, bool overwrite, int streams)
    : id_(id),
      mode_(mode),
      local_path_(std::move(local_path)),
      remote_url_(std::move(remote_url)),
      forwarded_(std::move(forwarded_headers)),
      overwrite_(overwrite),
      streams_(streams),
      created_at_(unix_now()) {}

JobState CopyJob::state() const {
  std::lock_guard lock(mu_);
  return state_;
}

void CopyJob::transition(JobState from, JobState to) {
  {
    std::lock_guard lock(mu_);
    if (state_ != from) {
      throw std::logic_error("illegal job transition " + std::string(to_string(state_)) + " -> " +
                             std::string(to_string(to)));
    }
    state_ = to;
    if (to == JobState::kRunning) {
      started_at_ = unix_now();
    } else {
      finished_at_ = unix_now();
    }
  }
  cv_.notify_all();
}

void CopyJob::start() { transition(JobState::kPending, JobState::kRunning); }
void CopyJob::succeed() { transition(JobState::kRunning, JobState::kSucceeded); }
void CopyJob::finish_cancelled() { transition(JobState::kRunning, JobState::kCancelled); }

void CopyJob::fail(TpcError error) {
  {
    std::lock_guard lock(mu_);
    failure_ = std::move(error);
  }
  transition(JobState::kRunning, JobState::kFailed);
}

void CopyJob::set_layout(std::uint64_t size, std::uint32_t stripes) {
  std::lock_guard lock(mu_);
  size_ = size;
  stripes_.assign(std::max<std::uint32_t>(stripes, 1), 0);
}

void CopyJob::add_progress(std::uint32_t stripe, std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  if (stripe < stripes_.size()) stripes_[stripe] += bytes;
}

void CopyJob::raise_progress(std::uint32_t stripe, std::uint64_t bytes) {
  std::lock_guard lock(mu_);
  if (stripe < stripes_.size()) stripes_[stripe] = std::max(stripes_[stripe], bytes);
}

std::vector<PerfMarker> CopyJob::markers(std::int64_t now) const {
  std::lock_guard lock(mu_);
  if (stripes_.empty()) return {PerfMarker{now, 0, 0, 1}};
  std::vector<PerfMarker> out;
  const auto count = static_cast<std::uint32_t>(stripes_.size());
  for (std::uint32_t i = 0; i < count; ++i) out.push_back({now, i, stripes_[i], count});
  return out;
}

JobSnapshot CopyJob::snapshot() const {
  std::lock_guard lock(mu_);
  JobSnapshot s;
  s.id = id_;
  s.mode = mode_;
  s.local_path = local_path_.str();
  s.remote_url = remote_url_.str();
  s.state = state_;
  s.failure = failure_;
  s.stripe_bytes = stripes_;
  s.size = size_;
  s.created_at = created_at_;
  s.started_at = started_at_;
  s.finished_at = finished_at_;
  return s;
}

void CopyJob::cancel() {
  cancel_requested_.store(true);
  cancellation_.cancel();
  cv_.notify_all();
}

bool CopyJob::wait_terminal_until(std::chrono::steady_clock::time_point deadline) const {
  std::unique_lock lock(mu_);
  return cv_.wait_until(lock, deadline, [&] { return is_terminal(state_); });
}

bool AdmissionQueue::acquire(const CopyJob& job) {
  using namespace std::chrono_literals;
  std::unique_lock lock(mu_);
  queue_.push_back(job.id());
  for (;;) {
    if (job.cancel_requested()) {
      queue_.erase(std::find(queue_.begin(), queue_.end(), job.id()));
      cv_.notify_all();
      return false;
    }
    if (queue_.front() == job.id() && running_ < slots_) break;
    // Cancellation is polled; queued jobs are rare and short-lived.
    cv_.wait_for(lock, 50ms);
  }
  queue_.pop_front();
  ++running_;
  max_observed_ = std::max(max_observed_, running_);
  cv_.notify_all();
  return true;
}

void AdmissionQueue::release() {
  {
    std::lock_guard lock(mu_);
    --running_;
  }
  cv_.notify_all();
}

int AdmissionQueue::running() const {
  std::lock_guard lock(mu_);
  return running_;
}

int AdmissionQueue::max_running_observed() const {
  std::lock_guard lock(mu_);
  return max_observed_;
}

}  // namespace httptpc::endpoint
