#pragma once

#include <filesystem>
#include <mutex>
#include <shared_mutex>

#include "httptpc/store/object_store.hpp"

namespace httptpc::store {

/// Filesystem-backed store. Objects live at <root>/<canonical path> with a
/// JSON sidecar <root>/<canonical path>.meta holding
/// {size, sha256, created_at, generation}. Content is written to a hidden
/// temporary in the target directory and renamed into place on commit.
class DirectoryStore final : public ObjectStore {
 public:
  DirectoryStore(std::filesystem::path root, std::optional<std::uint64_t> capacity);

  std::unique_ptr<PendingWrite> begin_put(const VirtualPath& path, bool overwrite) override;
  std::unique_ptr<ObjectReader> open(const VirtualPath& path) const override;
  ObjectRecord remove(const VirtualPath& path) override;
  ObjectRecord stat(const VirtualPath& path) const override;
  bool is_container(const VirtualPath& path) const override;
  std::vector<ListEntry> list(const VirtualPath& path) const override;
  std::uint64_t used_bytes() const override;
  std::optional<std::uint64_t> capacity_bytes() const override { return capacity_; }

  static constexpr std::string_view kMetaSuffix = ".meta";
  static constexpr std::string_view kTempPrefix = ".tpc-tmp-";

 private:
  class Write;

  std::filesystem::path object_file(const VirtualPath& path) const;
  std::filesystem::path meta_file(const VirtualPath& path) const;
  std::optional<ObjectRecord> read_meta(const VirtualPath& path) const;
  void check_placement(const VirtualPath& path, bool overwrite) const;
  ObjectRecord commit(const VirtualPath& path, bool overwrite,
                      const std::filesystem::path& temp, std::optional<Sha256Digest> expected);
  void prune_empty_parents(const VirtualPath& path) const;
  void scan();

  std::filesystem::path root_;
  std::optional<std::uint64_t> capacity_;
  mutable std::shared_mutex mutex_;
  std::uint64_t used_ = 0;
  std::uint64_t next_generation_ = 1;
};

}  // namespace httptpc::store
