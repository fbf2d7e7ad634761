#include "httptpc/net/signals.hpp"

#include <csignal>
#include <mutex>

namespace httptpc::net {

void ignore_sigpipe() {
  static std::once_flag once;
  std::call_once(once, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace httptpc::net
