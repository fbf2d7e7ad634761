#pragma once

#include <cstdint>

#include "httptpc/endpoint/copy_job.hpp"
#include "httptpc/net/http_client.hpp"
#include "httptpc/store/object_store.hpp"

namespace httptpc::endpoint {

struct TransferContext {
  store::ObjectStore& store;
  net::ClientTls tls;
  double remote_timeout = 30.0;
  std::uint64_t min_stripe_bytes = 1 << 20;
};

/// Stripe boundaries: `count` contiguous ranges covering [0, size).
std::vector<store::ByteRange> partition(std::uint64_t size, std::uint32_t count);

/// Pulls the remote object into the local store. Throws TpcException.
void execute_pull(CopyJob& job, const TransferContext& ctx);
/// Pushes the local object to the remote URL with one PUT. Throws.
void execute_push(CopyJob& job, const TransferContext& ctx);

/// Admission, execution and the terminal transition for one job.
void run_job(CopyJob& job, AdmissionQueue& admission, const TransferContext& ctx);

}  // namespace httptpc::endpoint
