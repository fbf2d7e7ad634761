#pragma once

#include <map>
#include <mutex>
#include <shared_mutex>

#include "httptpc/store/object_store.hpp"

namespace httptpc::store {

/// Heap-backed store used by tests and in-process meshes. Each committed
/// generation is an immutable shared buffer, so readers never block writers.
class MemoryStore final : public ObjectStore {
 public:
  explicit MemoryStore(std::optional<std::uint64_t> capacity = std::nullopt);

  std::unique_ptr<PendingWrite> begin_put(const VirtualPath& path, bool overwrite) override;
  std::unique_ptr<ObjectReader> open(const VirtualPath& path) const override;
  ObjectRecord remove(const VirtualPath& path) override;
  ObjectRecord stat(const VirtualPath& path) const override;
  bool is_container(const VirtualPath& path) const override;
  std::vector<ListEntry> list(const VirtualPath& path) const override;
  std::uint64_t used_bytes() const override;
  std::optional<std::uint64_t> capacity_bytes() const override { return capacity_; }

 private:
  class Write;
  struct Stored {
    ObjectRecord record;
    std::shared_ptr<const std::string> data;
  };

  ObjectRecord commit(const VirtualPath& path, bool overwrite, std::string data,
                      std::optional<Sha256Digest> expected);
  void check_placement(const VirtualPath& path, bool overwrite) const;
  bool is_container_locked(const VirtualPath& path) const;

  mutable std::shared_mutex mutex_;
  std::map<VirtualPath, Stored> objects_;
  std::uint64_t used_ = 0;
  std::uint64_t next_generation_ = 1;
  std::optional<std::uint64_t> capacity_;
};

}  // namespace httptpc::store
