#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "httptpc/core/path.hpp"

namespace httptpc {

enum class Activity { kUpload, kDownload, kDelete, kManage, kList };

inline constexpr std::array<Activity, 5> kAllActivities{
    Activity::kUpload, Activity::kDownload, Activity::kDelete,
    Activity::kManage, Activity::kList};

/// Uppercase wire name ("UPLOAD", ...).
std::string_view to_string(Activity activity) noexcept;

/// Case-sensitive match against the five wire names.
std::optional<Activity> parse_activity(std::string_view text) noexcept;

/// An ACTIVITY:PATH authorization grant.
struct Scope {
  Activity activity = Activity::kDownload;
  VirtualPath path;

  std::string str() const;

  /// True when this grant authorizes `needed`: same activity and the path
  /// contains the needed path.
  bool covers(const Scope& needed) const noexcept {
    return activity == needed.activity && path.contains(needed.path);
  }

  friend bool operator==(const Scope&, const Scope&) = default;
};

/// Splits on the first colon; the path part is normalized and may not
/// contain a colon. Throws kBadRequest.
Scope parse_scope(std::string_view text);

enum class TransferMode { kPull, kPush };

std::string_view to_string(TransferMode mode) noexcept;
std::optional<TransferMode> parse_transfer_mode(std::string_view text) noexcept;

}  // namespace httptpc
