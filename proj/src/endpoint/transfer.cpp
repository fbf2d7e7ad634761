#include "httptpc/endpoint/transfer.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <thread>

#include "httptpc/core/encoding.hpp"

namespace httptpc::endpoint {
namespace {

[[noreturn]] void unexpected_status(const net::ClientResponse& res, std::string_view verb) {
  throw TpcException(ErrorKind::kRemoteFailure,
                     std::string(verb) + " " + res.url + " answered " + std::to_string(res.status),
                     res.status);
}

net::ClientRequest base_request(const CopyJob& job, const TransferContext& ctx, std::string method) {
  net::ClientRequest req;
  req.method = std::move(method);
  req.headers = job.forwarded_headers();
  req.max_redirects = net::kMaxRedirects;
  req.read_timeout = ctx.remote_timeout;
  req.connect_timeout = std::min(10.0, ctx.remote_timeout);
  return req;
}

std::optional<Sha256Digest> digest_from(const net::ClientResponse& res) {
  const auto header = res.header("Digest");
  if (!header) return std::nullopt;
  const std::string hex = sha256_hex_from_digest_header(*header);
  if (hex.size() != 64) return std::nullopt;
  const auto bytes = from_hex(hex);
  Sha256Digest out{};
  std::copy(bytes.begin(), bytes.end(), out.begin());
  return out;
}

std::uint64_t parse_length(const net::ClientResponse& res) {
  const auto text = res.header("Content-Length");
  std::uint64_t value = 0;
  if (!text || std::from_chars(text->data(), text->data() + text->size(), value).ec != std::errc{}) {
    throw TpcException(ErrorKind::kProtocolViolation, "HEAD " + res.url + " gave no usable Content-Length");
  }
  return value;
}

void fetch_stripe(CopyJob& job, const TransferContext& ctx, store::PendingWrite& write,
                  std::uint32_t index, store::ByteRange range, bool ranged) {
  auto req = base_request(job, ctx, "GET");
  if (ranged) {
    req.headers.emplace_back("Range", "bytes=" + std::to_string(range.start) + "-" +
                                          std::to_string(range.end - 1));
  }
  const std::uint64_t want = range.end - range.start;
  std::uint64_t got = 0;
  bool overflow = false;
  req.sink = [&](std::string_view chunk) {
    if (got + chunk.size() > want) {
      overflow = true;
      return false;
    }
    write.write_at(range.start + got, std::span<const char>(chunk.data(), chunk.size()));
    got += chunk.size();
    job.add_progress(index, chunk.size());
    return true;
  };
  net::ClientResponse res;
  try {
    res = net::send(job.remote_url(), req, ctx.tls, &job.cancellation());
  } catch (const TpcException&) {
    if (overflow) {
      throw TpcException(ErrorKind::kProtocolViolation,
                         "remote sent more than the " + std::to_string(want) + " bytes expected");
    }
    throw;
  }
  if (res.status != (ranged ? 206 : 200)) {
    if (ranged && res.status == 200) {
      throw TpcException(ErrorKind::kProtocolViolation, "remote ignored the Range request", 200);
    }
    unexpected_status(res, "GET");
  }
  if (got != want) {
    throw TpcException(ErrorKind::kRemoteFailure,
                       "stripe " + std::to_string(index) + " ended after " + std::to_string(got) +
                           " of " + std::to_string(want) + " bytes");
  }
}

}  // namespace

std::vector<store::ByteRange> partition(std::uint64_t size, std::uint32_t count) {
  std::vector<store::ByteRange> out;
  if (count == 0) return out;
  for (std::uint32_t i = 0; i < count; ++i) {
    // 128-bit products keep the split exact for any 64-bit size.
    const auto start = static_cast<std::uint64_t>((static_cast<unsigned __int128>(size) * i) / count);
    const auto end = static_cast<std::uint64_t>((static_cast<unsigned __int128>(size) * (i + 1)) / count);
    out.push_back({start, end});
  }
  return out;
}

void execute_pull(CopyJob& job, const TransferContext& ctx) {
  const auto meta = net::send(job.remote_url(), base_request(job, ctx, "HEAD"), ctx.tls,
                              &job.cancellation());
  if (meta.status != 200) unexpected_status(meta, "HEAD");
  const std::uint64_t size = parse_length(meta);
  const bool ranges_ok = meta.header("Accept-Ranges").value_or("").find("bytes") != std::string::npos;
  const auto expected = digest_from(meta);

  const auto streams = static_cast<std::uint32_t>(job.streams());
  const bool split = ranges_ok && streams > 1 && size >= streams * ctx.min_stripe_bytes;
  const std::uint32_t stripes = split ? streams : 1;
  job.set_layout(size, stripes);
  spdlog::debug("job {}: pulling {} bytes from {} over {} stripe(s)", job.id(), size,
                job.remote_url().str(), stripes);

  auto write = ctx.store.begin_put(job.local_path(), job.overwrite());
  const auto ranges = partition(size, stripes);

  std::mutex error_mu;
  std::optional<TpcError> first_error;
  auto run = [&](std::uint32_t i) {
    try {
      fetch_stripe(job, ctx, *write, i, ranges[i], split);
    } catch (const TpcException& e) {
      std::lock_guard lock(error_mu);
      if (!first_error) first_error = e.error();
      job.abort_transfer();
    } catch (const std::exception& e) {
      std::lock_guard lock(error_mu);
      if (!first_error) first_error = TpcError{ErrorKind::kRemoteFailure, e.what(), std::nullopt};
      job.abort_transfer();
    }
  };
  std::vector<std::thread> workers;
  for (std::uint32_t i = 1; i < stripes; ++i) workers.emplace_back(run, i);
  run(0);
  for (auto& w : workers) w.join();

  if (job.cancel_requested()) throw TpcException(ErrorKind::kCancelled, "orchestrator disconnected");
  if (first_error) throw TpcException(*first_error);
  write->commit(expected);
}

void execute_push(CopyJob& job, const TransferContext& ctx) {
  const auto reader = ctx.store.open(job.local_path());
  const auto& record = reader->record();
  job.set_layout(record.size, 1);

  auto req = base_request(job, ctx, "PUT");
  req.headers.emplace_back("Want-Digest", "sha-256");
  req.body_length = record.size;
  req.source = [&](std::uint64_t offset, std::span<char> out) {
    const std::size_t n = reader->read(offset, out);
    job.raise_progress(0, offset + n);
    return n;
  };
  const auto res = net::send(job.remote_url(), req, ctx.tls, &job.cancellation());
  if (job.cancel_requested()) throw TpcException(ErrorKind::kCancelled, "orchestrator disconnected");
  if (res.status < 200 || res.status >= 300) unexpected_status(res, "PUT");
  if (const auto remote = digest_from(res); remote && *remote != record.sha256) {
    throw TpcException(ErrorKind::kRemoteFailure, "destination digest " + to_hex(*remote) +
                                                      " differs from source " + record.sha256_hex());
  }
  job.raise_progress(0, record.size);
}

void run_job(CopyJob& job, AdmissionQueue& admission, const TransferContext& ctx) {
  if (!admission.acquire(job)) {
    job.start();
    job.finish_cancelled();
    return;
  }
  job.start();
  std::optional<TpcError> failure;
  try {
    if (job.mode() == TransferMode::kPull) {
      execute_pull(job, ctx);
    } else {
      execute_push(job, ctx);
    }
  } catch (const TpcException& e) {
    failure = e.error();
  } catch (const std::exception& e) {
    failure = TpcError{ErrorKind::kRemoteFailure, e.what(), std::nullopt};
  }
  admission.release();
  if (!failure) {
    job.succeed();
  } else if (job.cancel_requested()) {
    job.finish_cancelled();
  } else {
    spdlog::info("job {} failed: {}", job.id(), failure->to_string());
    job.fail(std::move(*failure));
  }
}

}  // namespace httptpc::endpoint
