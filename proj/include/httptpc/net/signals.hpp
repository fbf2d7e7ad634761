#pragma once

namespace httptpc::net {

/// TLS writes to a reset peer would otherwise raise SIGPIPE and kill the
/// process. Idempotent.
void ignore_sigpipe();

}  // namespace httptpc::net
