#include "httptpc/core/perf_marker.hpp"

#include <charconv>
#include <map>

#include "httptpc/core/error.hpp"

namespace httptpc {
namespace {

constexpr std::string_view kHeader = "Perf Marker";
constexpr std::string_view kTimestamp = "    Timestamp: ";
constexpr std::string_view kStripeIndex = "    Stripe Index: ";
constexpr std::string_view kStripeBytes = "    Stripe Bytes Transferred: ";
constexpr std::string_view kStripeCount = "    Total Stripe Count: ";
constexpr std::string_view kEnd = "End";
constexpr std::string_view kSuccess = "success: ";
constexpr std::string_view kFailure = "failure: ";

[[noreturn]] void violation(std::string detail) {
  throw TpcException(ErrorKind::kProtocolViolation, std::move(detail));
}

template <typename T>
T field_value(std::string_view line, std::string_view prefix) {
  if (line.substr(0, prefix.size()) != prefix) {
    violation("expected '" + std::string(prefix) + "' in marker, got '" +
              std::string(line) + "'");
  }
  const auto digits = line.substr(prefix.size());
  T value{};
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string_view::npos) {
    violation("non-numeric marker field: '" + std::string(line) + "'");
  }
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc{} || ptr != digits.data() + digits.size()) {
    violation("marker field out of range: '" + std::string(line) + "'");
  }
  return value;
}

}  // namespace

std::string render_perf_marker(const PerfMarker& m) {
  std::string out{kHeader};
  out += '\n';
  out += kTimestamp;
  out += std::to_string(m.timestamp);
  out += '\n';
  out += kStripeIndex;
  out += std::to_string(m.stripe_index);
  out += '\n';
  out += kStripeBytes;
  out += std::to_string(m.stripe_bytes_transferred);
  out += '\n';
  out += kStripeCount;
  out += std::to_string(m.total_stripe_count);
  out += '\n';
  out += kEnd;
  out += '\n';
  return out;
}

std::string render_terminal(const TerminalResult& terminal) {
  std::string out{terminal.success ? kSuccess : kFailure};
  for (char c : terminal.reason) out += (c == '\n' || c == '\r') ? ' ' : c;
  out += '\n';
  return out;
}

std::string render_marker_stream(const MarkerStream& stream) {
  std::string out;
  for (const auto& m : stream.markers) out += render_perf_marker(m);
  out += render_terminal(stream.terminal);
  return out;
}

std::vector<PerfMarker> MarkerStreamParser::feed(std::string_view bytes) {
  std::vector<PerfMarker> out;
  if (state_ == State::kDone && !bytes.empty()) {
    violation("trailing data after terminal line");
  }
  pending_.append(bytes);
  std::size_t start = 0;
  for (;;) {
    const auto nl = pending_.find('\n', start);
    if (nl == std::string::npos) break;
    consume_line(std::string_view(pending_).substr(start, nl - start), out);
    start = nl + 1;
    if (state_ == State::kDone && start < pending_.size()) {
      violation("trailing data after terminal line");
    }
  }
  pending_.erase(0, start);
  return out;
}

void MarkerStreamParser::consume_line(std::string_view line,
                                      std::vector<PerfMarker>& out) {
  switch (state_) {
    case State::kIdle:
      if (line == kHeader) {
        current_ = PerfMarker{};
        state_ = State::kTimestamp;
      } else if (line.substr(0, kSuccess.size()) == kSuccess) {
        terminal_ = TerminalResult{true, std::string(line.substr(kSuccess.size()))};
        state_ = State::kDone;
      } else if (line.substr(0, kFailure.size()) == kFailure) {
        terminal_ = TerminalResult{false, std::string(line.substr(kFailure.size()))};
        state_ = State::kDone;
      } else {
        violation("unexpected line in marker stream: '" + std::string(line) + "'");
      }
      break;
    case State::kTimestamp:
      current_.timestamp = field_value<std::int64_t>(line, kTimestamp);
      state_ = State::kStripeIndex;
      break;
    case State::kStripeIndex:
      current_.stripe_index = field_value<std::uint32_t>(line, kStripeIndex);
      state_ = State::kStripeBytes;
      break;
    case State::kStripeBytes:
      current_.stripe_bytes_transferred = field_value<std::uint64_t>(line, kStripeBytes);
      state_ = State::kStripeCount;
      break;
    case State::kStripeCount:
      current_.total_stripe_count = field_value<std::uint32_t>(line, kStripeCount);
      if (current_.total_stripe_count < 1 ||
          current_.stripe_index >= current_.total_stripe_count) {
        violation("stripe index outside stripe count");
      }
      state_ = State::kEnd;
      break;
    case State::kEnd:
      if (line != kEnd) violation("marker block missing 'End'");
      out.push_back(current_);
      state_ = State::kIdle;
      break;
    case State::kDone:
      violation("trailing data after terminal line");
  }
}

void MarkerStreamParser::finish() const {
  if (!pending_.empty()) violation("unterminated line at end of marker stream");
  if (state_ != State::kDone) violation("marker stream ended without a terminal line");
}

MarkerStream parse_perf_marker_stream(std::string_view body) {
  MarkerStreamParser parser;
  MarkerStream out;
  out.markers = parser.feed(body);
  parser.finish();
  out.terminal = *parser.terminal();
  return out;
}

bool markers_monotonic(const std::vector<PerfMarker>& markers) {
  std::map<std::uint32_t, std::uint64_t> last_bytes;
  std::int64_t last_ts = 0;
  bool first = true;
  for (const auto& m : markers) {
    if (!first && m.timestamp < last_ts) return false;
    first = false;
    last_ts = m.timestamp;
    auto [it, inserted] = last_bytes.try_emplace(m.stripe_index, m.stripe_bytes_transferred);
    if (!inserted) {
      if (m.stripe_bytes_transferred < it->second) return false;
      it->second = m.stripe_bytes_transferred;
    }
  }
  return true;
}

}  // namespace httptpc
