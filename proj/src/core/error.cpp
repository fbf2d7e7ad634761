#include "httptpc/core/error.hpp"

#include <algorithm>
#include <array>
#include <utility>

namespace httptpc {
namespace {

constexpr std::array<std::pair<ErrorKind, std::string_view>, 9> kNames{{
    {ErrorKind::kBadRequest, "BAD_REQUEST"},
    {ErrorKind::kUnauthorized, "UNAUTHORIZED"},
    {ErrorKind::kForbidden, "FORBIDDEN"},
    {ErrorKind::kNotFound, "NOT_FOUND"},
    {ErrorKind::kConflict, "CONFLICT"},
    {ErrorKind::kRemoteFailure, "REMOTE_FAILURE"},
    {ErrorKind::kTimeout, "TIMEOUT"},
    {ErrorKind::kCancelled, "CANCELLED"},
    {ErrorKind::kProtocolViolation, "PROTOCOL_VIOLATION"},
}};

}  // namespace

std::string_view to_string(ErrorKind kind) noexcept {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "PROTOCOL_VIOLATION";
}

std::optional<ErrorKind> parse_error_kind(std::string_view text) noexcept {
  for (const auto& [k, name] : kNames) {
    if (name == text) return k;
  }
  return std::nullopt;
}

int http_status_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kBadRequest: return 400;
    case ErrorKind::kUnauthorized: return 401;
    case ErrorKind::kForbidden: return 403;
    case ErrorKind::kNotFound: return 404;
    case ErrorKind::kConflict: return 409;
    case ErrorKind::kRemoteFailure: return 502;
    case ErrorKind::kTimeout: return 504;
    case ErrorKind::kCancelled: return 499;
    case ErrorKind::kProtocolViolation: return 500;
  }
  return 500;
}

ErrorKind error_kind_for_status(int status) noexcept {
  switch (status) {
    case 400:
    case 416: return ErrorKind::kBadRequest;
    case 401: return ErrorKind::kUnauthorized;
    case 403: return ErrorKind::kForbidden;
    case 404: return ErrorKind::kNotFound;
    case 409: return ErrorKind::kConflict;
    case 408:
    case 504: return ErrorKind::kTimeout;
    default: break;
  }
  if (status >= 500) return ErrorKind::kRemoteFailure;
  return ErrorKind::kProtocolViolation;
}

std::string TpcError::to_string() const {
  std::string out{httptpc::to_string(kind)};
  if (remote_status) out += " (HTTP " + std::to_string(*remote_status) + ")";
  if (!detail.empty()) out += ": " + detail;
  return out;
}

std::optional<TpcError> parse_tpc_error(std::string_view text) {
  const auto end = text.find_first_of(" :");
  const auto kind = parse_error_kind(text.substr(0, end));
  if (!kind) return std::nullopt;
  TpcError out{*kind, {}, std::nullopt};
  std::string_view rest = end == std::string_view::npos ? std::string_view{} : text.substr(end);
  constexpr std::string_view kStatus = " (HTTP ";
  if (rest.starts_with(kStatus) && rest.size() >= kStatus.size() + 4 && rest[kStatus.size() + 3] == ')') {
    const auto digits = rest.substr(kStatus.size(), 3);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      out.remote_status = std::stoi(std::string(digits));
      rest.remove_prefix(kStatus.size() + 4);
    }
  }
  if (rest.starts_with(": ")) out.detail = std::string(rest.substr(2));
  return out;
}

TpcException::TpcException(TpcError error)
    : std::runtime_error(error.to_string()), error_(std::move(error)) {}

TpcException::TpcException(ErrorKind kind, std::string detail,
                           std::optional<int> remote_status)
    : TpcException(TpcError{kind, std::move(detail), remote_status}) {}

}  // namespace httptpc
