#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace httptpc {

/// Progress record streamed in a COPY response body.
struct PerfMarker {
  std::int64_t timestamp = 0;
  std::uint32_t stripe_index = 0;
  std::uint64_t stripe_bytes_transferred = 0;
  std::uint32_t total_stripe_count = 1;

  friend bool operator==(const PerfMarker&, const PerfMarker&) = default;
};

/// The single line that ends every COPY body: "success: Created" or
/// "failure: <reason>".
struct TerminalResult {
  bool success = false;
  std::string reason;

  static TerminalResult created() { return {true, "Created"}; }
  static TerminalResult failure(std::string reason) {
    return {false, std::move(reason)};
  }

  friend bool operator==(const TerminalResult&, const TerminalResult&) = default;
};

std::string render_perf_marker(const PerfMarker& marker);

/// Newlines in a failure reason are flattened to spaces.
std::string render_terminal(const TerminalResult& terminal);

struct MarkerStream {
  std::vector<PerfMarker> markers;
  TerminalResult terminal;

  friend bool operator==(const MarkerStream&, const MarkerStream&) = default;
};

std::string render_marker_stream(const MarkerStream& stream);

/// Incremental parser for COPY response bodies. Throws
/// TpcException(kProtocolViolation) on a malformed block or on bytes after
/// the terminal line.
class MarkerStreamParser {
 public:
  /// Consumes more body bytes; returns the markers completed by them.
  std::vector<PerfMarker> feed(std::string_view bytes);

  /// Declares end of body; throws if no terminal line was seen or a
  /// partial line is pending.
  void finish() const;

  const std::optional<TerminalResult>& terminal() const noexcept { return terminal_; }

 private:
  void consume_line(std::string_view line, std::vector<PerfMarker>& out);

  enum class State { kIdle, kTimestamp, kStripeIndex, kStripeBytes, kStripeCount, kEnd, kDone };

  State state_ = State::kIdle;
  std::string pending_;
  PerfMarker current_;
  std::optional<TerminalResult> terminal_;
};

MarkerStream parse_perf_marker_stream(std::string_view body);

/// True when, per stripe index, byte counts never decrease and timestamps
/// never decrease across the sequence.
bool markers_monotonic(const std::vector<PerfMarker>& markers);

}  // namespace httptpc
