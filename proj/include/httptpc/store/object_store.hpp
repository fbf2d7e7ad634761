#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "httptpc/core/encoding.hpp"
#include "httptpc/core/path.hpp"

namespace httptpc::store {

struct ObjectRecord {
  VirtualPath path;
  std::uint64_t size = 0;
  Sha256Digest sha256{};
  std::int64_t created_at = 0;
  std::uint64_t generation = 0;

  std::string sha256_hex() const { return to_hex(sha256); }
  friend bool operator==(const ObjectRecord&, const ObjectRecord&) = default;
};

struct ListEntry {
  std::string name;
  bool is_container = false;
  std::optional<ObjectRecord> record;  // set for objects
};

/// Half-open byte interval [start, end).
struct ByteRange {
  std::uint64_t start = 0;
  std::uint64_t end = 0;
};

/// A consistent snapshot of one object generation. Reads keep returning
/// that generation's bytes even if the path is overwritten meanwhile.
class ObjectReader {
 public:
  virtual ~ObjectReader() = default;
  virtual const ObjectRecord& record() const noexcept = 0;
  /// Reads up to out.size() bytes at `offset`; returns 0 at end of object.
  virtual std::size_t read(std::uint64_t offset, std::span<char> out) = 0;
};

/// An in-progress write. Nothing is visible until commit(); destroying an
/// uncommitted write discards it. write_at() is safe to call concurrently
/// for disjoint ranges.
class PendingWrite {
 public:
  virtual ~PendingWrite() = default;
  virtual void write_at(std::uint64_t offset, std::span<const char> data) = 0;
  void append(std::string_view data);
  std::uint64_t bytes_written() const noexcept { return extent_.load(); }

  /// Publishes the content atomically. When `expected` is given and the
  /// content hashes differently, nothing is published and kRemoteFailure
  /// is thrown. Throws kConflict when a create-only write lost a race and
  /// kBadRequest when the quota would be exceeded.
  virtual ObjectRecord commit(std::optional<Sha256Digest> expected = std::nullopt) = 0;

 protected:
  void note_extent(std::uint64_t end) noexcept;
  std::atomic<std::uint64_t> extent_{0};
};

class ObjectStore {
 public:
  virtual ~ObjectStore() = default;

  /// Starts a write. With overwrite=false an existing object is a
  /// kConflict. An object path that is also a container (or lies below an
  /// object) is a kConflict too.
  virtual std::unique_ptr<PendingWrite> begin_put(const VirtualPath& path, bool overwrite) = 0;

  virtual std::unique_ptr<ObjectReader> open(const VirtualPath& path) const = 0;
  virtual ObjectRecord remove(const VirtualPath& path) = 0;
  virtual ObjectRecord stat(const VirtualPath& path) const = 0;
  virtual bool is_container(const VirtualPath& path) const = 0;
  /// Children of a container. kBadRequest for an object, kNotFound when
  /// absent; root always lists (possibly empty).
  virtual std::vector<ListEntry> list(const VirtualPath& path) const = 0;

  virtual std::uint64_t used_bytes() const = 0;
  virtual std::optional<std::uint64_t> capacity_bytes() const = 0;

  ObjectRecord put(const VirtualPath& path, std::string_view content, bool overwrite);

  struct GetResult {
    std::string data;
    ObjectRecord record;
  };
  /// Whole object, or exactly [start, end) when a range is given
  /// (0 <= start < end <= size, else kBadRequest).
  GetResult get(const VirtualPath& path, std::optional<ByteRange> range = std::nullopt) const;
};

enum class Backend { kInMemory, kDirectory };

struct StoreConfig {
  Backend backend = Backend::kInMemory;
  std::filesystem::path root;  // directory backend only
  std::optional<std::uint64_t> capacity_bytes;
};

std::shared_ptr<ObjectStore> make_store(const StoreConfig& config);

}  // namespace httptpc::store
