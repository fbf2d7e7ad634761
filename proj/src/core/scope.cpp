#include "httptpc/core/scope.hpp"

#include "httptpc/core/error.hpp"

namespace httptpc {

std::string_view to_string(Activity activity) noexcept {
  switch (activity) {
    case Activity::kUpload: return "UPLOAD";
    case Activity::kDownload: return "DOWNLOAD";
    case Activity::kDelete: return "DELETE";
    case Activity::kManage: return "MANAGE";
    case Activity::kList: return "LIST";
  }
  return "LIST";
}

std::optional<Activity> parse_activity(std::string_view text) noexcept {
  for (auto a : kAllActivities) {
    if (to_string(a) == text) return a;
  }
  return std::nullopt;
}

std::string Scope::str() const {
  std::string out{to_string(activity)};
  out += ':';
  out += path.str();
  return out;
}

Scope parse_scope(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) {
    throw TpcException(ErrorKind::kBadRequest,
                       "scope lacks ':' separator: " + std::string(text));
  }
  const auto activity = parse_activity(text.substr(0, colon));
  if (!activity) {
    throw TpcException(ErrorKind::kBadRequest,
                       "unknown activity in scope: " + std::string(text));
  }
  const auto raw_path = text.substr(colon + 1);
  if (raw_path.find(':') != std::string_view::npos) {
    throw TpcException(ErrorKind::kBadRequest,
                       "scope path may not contain ':': " + std::string(text));
  }
  return Scope{*activity, VirtualPath::normalize(raw_path)};
}

std::string_view to_string(TransferMode mode) noexcept {
  return mode == TransferMode::kPull ? "PULL" : "PUSH";
}

std::optional<TransferMode> parse_transfer_mode(std::string_view text) noexcept {
  if (text == "PULL") return TransferMode::kPull;
  if (text == "PUSH") return TransferMode::kPush;
  return std::nullopt;
}

}  // namespace httptpc
