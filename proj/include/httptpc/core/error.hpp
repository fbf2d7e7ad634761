#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace httptpc {

/// Failure classification shared by every component. Reports and the
/// transfer matrix key on these values, so the text forms are stable.
enum class ErrorKind {
  kBadRequest,
  kUnauthorized,
  kForbidden,
  kNotFound,
  kConflict,
  kRemoteFailure,
  kTimeout,
  kCancelled,
  kProtocolViolation,
};

std::string_view to_string(ErrorKind kind) noexcept;
std::optional<ErrorKind> parse_error_kind(std::string_view text) noexcept;

/// HTTP status an endpoint answers with for a locally raised error.
int http_status_for(ErrorKind kind) noexcept;

/// Maps a remote HTTP status onto the taxonomy (4xx as-is, 5xx remote).
ErrorKind error_kind_for_status(int status) noexcept;

struct TpcError {
  ErrorKind kind = ErrorKind::kProtocolViolation;
  std::string detail;
  std::optional<int> remote_status;

  std::string to_string() const;
  friend bool operator==(const TpcError&, const TpcError&) = default;
};

/// Inverse of TpcError::to_string(). nullopt when the text does not start
/// with a known kind.
std::optional<TpcError> parse_tpc_error(std::string_view text);

class TpcException : public std::runtime_error {
 public:
  explicit TpcException(TpcError error);
  TpcException(ErrorKind kind, std::string detail,
               std::optional<int> remote_status = std::nullopt);

  const TpcError& error() const noexcept { return error_; }
  ErrorKind kind() const noexcept { return error_.kind; }

 private:
  TpcError error_;
};

}  // namespace httptpc
