#include "httptpc/store/memory_store.hpp"

#include <chrono>
#include <cstring>

#include "httptpc/core/error.hpp"

namespace httptpc::store {
namespace {

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class SnapshotReader final : public ObjectReader {
 public:
  SnapshotReader(ObjectRecord record, std::shared_ptr<const std::string> data)
      : record_(std::move(record)), data_(std::move(data)) {}

  const ObjectRecord& record() const noexcept override { return record_; }

  std::size_t read(std::uint64_t offset, std::span<char> out) override {
    if (offset >= data_->size()) return 0;
    const auto n = std::min<std::uint64_t>(out.size(), data_->size() - offset);
    std::memcpy(out.data(), data_->data() + offset, n);
    return n;
  }

 private:
  ObjectRecord record_;
  std::shared_ptr<const std::string> data_;
};

}  // namespace

class MemoryStore::Write final : public PendingWrite {
 public:
  Write(MemoryStore& store, VirtualPath path, bool overwrite)
      : store_(store), path_(std::move(path)), overwrite_(overwrite) {}

  void write_at(std::uint64_t offset, std::span<const char> data) override {
    const auto end = offset + data.size();
    if (store_.capacity_ && end > *store_.capacity_) {
      throw TpcException(ErrorKind::kBadRequest, "object exceeds store quota");
    }
    std::lock_guard lock(mutex_);
    if (buffer_.size() < end) buffer_.resize(end);
    std::memcpy(buffer_.data() + offset, data.data(), data.size());
    note_extent(end);
  }

  ObjectRecord commit(std::optional<Sha256Digest> expected) override {
    std::lock_guard lock(mutex_);
    return store_.commit(path_, overwrite_, std::move(buffer_), expected);
  }

 private:
  MemoryStore& store_;
  VirtualPath path_;
  bool overwrite_;
  std::mutex mutex_;
  std::string buffer_;
};

MemoryStore::MemoryStore(std::optional<std::uint64_t> capacity) : capacity_(capacity) {}

bool MemoryStore::is_container_locked(const VirtualPath& path) const {
  if (path.is_root()) return true;
  auto it = objects_.upper_bound(path);
  return it != objects_.end() && path.contains(it->first);
}

void MemoryStore::check_placement(const VirtualPath& path, bool overwrite) const {
  if (path.is_root()) throw TpcException(ErrorKind::kBadRequest, "cannot write to root");
  if (!overwrite && objects_.count(path)) {
    throw TpcException(ErrorKind::kConflict, "object exists: " + path.str());
  }
  if (is_container_locked(path)) {
    throw TpcException(ErrorKind::kConflict, "path is a container: " + path.str());
  }
  for (auto p = path.parent(); !p.is_root(); p = p.parent()) {
    if (objects_.count(p)) {
      throw TpcException(ErrorKind::kConflict, "ancestor is an object: " + p.str());
    }
  }
}

std::unique_ptr<PendingWrite> MemoryStore::begin_put(const VirtualPath& path, bool overwrite) {
  {
    std::shared_lock lock(mutex_);
    check_placement(path, overwrite);
  }
  return std::make_unique<Write>(*this, path, overwrite);
}

ObjectRecord MemoryStore::commit(const VirtualPath& path, bool overwrite, std::string data,
                                 std::optional<Sha256Digest> expected) {
  ObjectRecord record;
  record.path = path;
  record.size = data.size();
  record.sha256 = sha256(data);
  record.created_at = unix_now();
  if (expected && *expected != record.sha256) {
    throw TpcException(ErrorKind::kRemoteFailure,
                       "digest mismatch: expected " + to_hex(*expected) + ", got " +
                           record.sha256_hex());
  }
  std::unique_lock lock(mutex_);
  check_placement(path, overwrite);
  const auto existing = objects_.find(path);
  const std::uint64_t old_size = existing == objects_.end() ? 0 : existing->second.record.size;
  if (capacity_ && used_ - old_size + record.size > *capacity_) {
    throw TpcException(ErrorKind::kBadRequest, "store quota exceeded");
  }
  record.generation = next_generation_++;
  used_ = used_ - old_size + record.size;
  objects_[path] = Stored{record, std::make_shared<const std::string>(std::move(data))};
  return record;
}

std::unique_ptr<ObjectReader> MemoryStore::open(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  auto it = objects_.find(path);
  if (it == objects_.end()) throw TpcException(ErrorKind::kNotFound, path.str());
  return std::make_unique<SnapshotReader>(it->second.record, it->second.data);
}

ObjectRecord MemoryStore::remove(const VirtualPath& path) {
  std::unique_lock lock(mutex_);
  auto it = objects_.find(path);
  if (it == objects_.end()) throw TpcException(ErrorKind::kNotFound, path.str());
  auto record = it->second.record;
  used_ -= record.size;
  objects_.erase(it);
  return record;
}

ObjectRecord MemoryStore::stat(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  auto it = objects_.find(path);
  if (it == objects_.end()) throw TpcException(ErrorKind::kNotFound, path.str());
  return it->second.record;
}

bool MemoryStore::is_container(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  return is_container_locked(path);
}

std::vector<ListEntry> MemoryStore::list(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  if (!is_container_locked(path)) {
    if (objects_.count(path)) {
      throw TpcException(ErrorKind::kBadRequest, "not a container: " + path.str());
    }
    throw TpcException(ErrorKind::kNotFound, path.str());
  }
  std::vector<ListEntry> out;
  const auto depth = path.segments().size();
  for (auto it = objects_.upper_bound(path); it != objects_.end() && path.contains(it->first);
       ++it) {
    const auto& segs = it->first.segments();
    const auto& name = segs[depth];
    if (!out.empty() && out.back().name == name) continue;
    ListEntry entry;
    entry.name = name;
    if (segs.size() == depth + 1) {
      entry.record = it->second.record;
    } else {
      entry.is_container = true;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

std::uint64_t MemoryStore::used_bytes() const {
  std::shared_lock lock(mutex_);
  return used_;
}

}  // namespace httptpc::store
