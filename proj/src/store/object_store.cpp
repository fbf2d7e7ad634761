#include "httptpc/store/object_store.hpp"

#include "httptpc/core/error.hpp"
#include "httptpc/store/directory_store.hpp"
#include "httptpc/store/memory_store.hpp"

namespace httptpc::store {

void PendingWrite::append(std::string_view data) {
  write_at(extent_.load(), std::span(data.data(), data.size()));
}

void PendingWrite::note_extent(std::uint64_t end) noexcept {
  auto current = extent_.load();
  while (end > current && !extent_.compare_exchange_weak(current, end)) {
  }
}

ObjectRecord ObjectStore::put(const VirtualPath& path, std::string_view content,
                              bool overwrite) {
  auto w = begin_put(path, overwrite);
  w->append(content);
  return w->commit();
}

ObjectStore::GetResult ObjectStore::get(const VirtualPath& path,
                                        std::optional<ByteRange> range) const {
  auto reader = open(path);
  GetResult out;
  out.record = reader->record();
  std::uint64_t start = 0;
  std::uint64_t end = out.record.size;
  if (range) {
    if (range->start >= range->end || range->end > out.record.size) {
      throw TpcException(ErrorKind::kBadRequest, "unsatisfiable range");
    }
    start = range->start;
    end = range->end;
  }
  out.data.resize(end - start);
  std::uint64_t done = 0;
  while (done < out.data.size()) {
    const auto n = reader->read(start + done, std::span(out.data.data() + done,
                                                        out.data.size() - done));
    if (n == 0) throw TpcException(ErrorKind::kProtocolViolation, "short read from store");
    done += n;
  }
  return out;
}

std::shared_ptr<ObjectStore> make_store(const StoreConfig& config) {
  if (config.backend == Backend::kDirectory) {
    return std::make_shared<DirectoryStore>(config.root, config.capacity_bytes);
  }
  return std::make_shared<MemoryStore>(config.capacity_bytes);
}

}  // namespace httptpc::store
