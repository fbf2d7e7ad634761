#include "httptpc/store/directory_store.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>

#include "httptpc/core/error.hpp"

namespace fs = std::filesystem;

namespace httptpc::store {
namespace {

std::int64_t unix_now() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

class Fd {
 public:
  explicit Fd(int fd = -1) noexcept : fd_(fd) {}
  Fd(Fd&& other) noexcept : fd_(std::exchange(other.fd_, -1)) {}
  Fd& operator=(Fd&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = std::exchange(other.fd_, -1);
    }
    return *this;
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  ~Fd() { reset(); }

  int get() const noexcept { return fd_; }
  explicit operator bool() const noexcept { return fd_ >= 0; }
  void reset() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

[[noreturn]] void io_failure(const std::string& what) {
  throw TpcException(ErrorKind::kProtocolViolation,
                     what + ": " + std::system_category().message(errno));
}

class FileReader final : public ObjectReader {
 public:
  FileReader(ObjectRecord record, Fd fd) : record_(std::move(record)), fd_(std::move(fd)) {}

  const ObjectRecord& record() const noexcept override { return record_; }

  std::size_t read(std::uint64_t offset, std::span<char> out) override {
    if (offset >= record_.size) return 0;
    const auto want = std::min<std::uint64_t>(out.size(), record_.size - offset);
    for (;;) {
      const auto n = ::pread(fd_.get(), out.data(), want, static_cast<off_t>(offset));
      if (n >= 0) return static_cast<std::size_t>(n);
      if (errno != EINTR) io_failure("pread");
    }
  }

 private:
  ObjectRecord record_;
  Fd fd_;
};

std::string temp_name() {
  static std::atomic<std::uint64_t> counter{0};
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return std::string(DirectoryStore::kTempPrefix) + std::to_string(::getpid()) + "-" +
         std::to_string(counter++) + "-" + std::to_string(rng() & 0xffffff);
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

void write_file_atomically(const fs::path& target, const std::string& content) {
  const auto temp = target.parent_path() / temp_name();
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) io_failure("writing " + temp.string());
  }
  fs::rename(temp, target);
}

}  // namespace

class DirectoryStore::Write final : public PendingWrite {
 public:
  Write(DirectoryStore& store, VirtualPath path, bool overwrite, fs::path temp, Fd fd)
      : store_(store),
        path_(std::move(path)),
        overwrite_(overwrite),
        temp_(std::move(temp)),
        fd_(std::move(fd)) {}

  ~Write() override {
    if (!committed_) {
      fd_.reset();
      std::unique_lock lock(store_.mutex_);
      std::error_code ec;
      fs::remove(temp_, ec);
      store_.prune_empty_parents(path_);
    }
  }

  void write_at(std::uint64_t offset, std::span<const char> data) override {
    const auto end = offset + data.size();
    if (store_.capacity_ && end > *store_.capacity_) {
      throw TpcException(ErrorKind::kBadRequest, "object exceeds store quota");
    }
    std::size_t done = 0;
    while (done < data.size()) {
      const auto n = ::pwrite(fd_.get(), data.data() + done, data.size() - done,
                              static_cast<off_t>(offset + done));
      if (n < 0) {
        if (errno == EINTR) continue;
        io_failure("pwrite");
      }
      done += static_cast<std::size_t>(n);
    }
    note_extent(end);
  }

  ObjectRecord commit(std::optional<Sha256Digest> expected) override {
    if (::fsync(fd_.get()) != 0) io_failure("fsync");
    fd_.reset();
    auto record = store_.commit(path_, overwrite_, temp_, expected);
    committed_ = true;
    return record;
  }

 private:
  DirectoryStore& store_;
  VirtualPath path_;
  bool overwrite_;
  fs::path temp_;
  Fd fd_;
  bool committed_ = false;
};

DirectoryStore::DirectoryStore(fs::path root, std::optional<std::uint64_t> capacity)
    : root_(std::move(root)), capacity_(capacity) {
  fs::create_directories(root_);
  scan();
}

void DirectoryStore::scan() {
  for (const auto& entry : fs::recursive_directory_iterator(root_)) {
    const auto name = entry.path().filename().string();
    if (name.rfind(kTempPrefix, 0) == 0) {
      std::error_code ec;
      fs::remove(entry.path(), ec);
      continue;
    }
    if (!entry.is_regular_file() || !ends_with(name, kMetaSuffix)) continue;
    std::ifstream in(entry.path());
    const auto meta = nlohmann::json::parse(in, nullptr, false);
    if (meta.is_discarded()) continue;
    used_ += meta.value("size", std::uint64_t{0});
    next_generation_ = std::max(next_generation_, meta.value("generation", std::uint64_t{0}) + 1);
  }
}

fs::path DirectoryStore::object_file(const VirtualPath& path) const {
  fs::path out = root_;
  for (const auto& seg : path.segments()) {
    if (ends_with(seg, kMetaSuffix) || seg.rfind(kTempPrefix, 0) == 0) {
      throw TpcException(ErrorKind::kBadRequest,
                         "name reserved by the directory backend: " + seg);
    }
    out /= seg;
  }
  return out;
}

fs::path DirectoryStore::meta_file(const VirtualPath& path) const {
  auto file = object_file(path);
  file += std::string(kMetaSuffix);
  return file;
}

std::optional<ObjectRecord> DirectoryStore::read_meta(const VirtualPath& path) const {
  std::ifstream in(meta_file(path));
  if (!in) return std::nullopt;
  const auto meta = nlohmann::json::parse(in, nullptr, false);
  if (meta.is_discarded()) {
    throw TpcException(ErrorKind::kProtocolViolation, "corrupt metadata for " + path.str());
  }
  ObjectRecord record;
  record.path = path;
  record.size = meta.at("size").get<std::uint64_t>();
  const auto digest = from_hex(meta.at("sha256").get<std::string>());
  if (digest.size() != record.sha256.size()) {
    throw TpcException(ErrorKind::kProtocolViolation, "corrupt digest for " + path.str());
  }
  std::copy(digest.begin(), digest.end(), record.sha256.begin());
  record.created_at = meta.at("created_at").get<std::int64_t>();
  record.generation = meta.at("generation").get<std::uint64_t>();
  return record;
}

void DirectoryStore::check_placement(const VirtualPath& path, bool overwrite) const {
  if (path.is_root()) throw TpcException(ErrorKind::kBadRequest, "cannot write to root");
  const auto file = object_file(path);
  if (fs::is_directory(file)) {
    throw TpcException(ErrorKind::kConflict, "path is a container: " + path.str());
  }
  if (!overwrite && fs::exists(meta_file(path))) {
    throw TpcException(ErrorKind::kConflict, "object exists: " + path.str());
  }
  for (auto p = path.parent(); !p.is_root(); p = p.parent()) {
    if (fs::exists(meta_file(p))) {
      throw TpcException(ErrorKind::kConflict, "ancestor is an object: " + p.str());
    }
  }
}

std::unique_ptr<PendingWrite> DirectoryStore::begin_put(const VirtualPath& path, bool overwrite) {
  std::unique_lock lock(mutex_);
  check_placement(path, overwrite);
  const auto file = object_file(path);
  fs::create_directories(file.parent_path());
  auto temp = file.parent_path() / temp_name();
  Fd fd(::open(temp.c_str(), O_RDWR | O_CREAT | O_EXCL | O_CLOEXEC, 0644));
  if (!fd) io_failure("creating " + temp.string());
  return std::make_unique<Write>(*this, path, overwrite, std::move(temp), std::move(fd));
}

ObjectRecord DirectoryStore::commit(const VirtualPath& path, bool overwrite,
                                    const fs::path& temp, std::optional<Sha256Digest> expected) {
  ObjectRecord record;
  record.path = path;
  {
    Fd fd(::open(temp.c_str(), O_RDONLY | O_CLOEXEC));
    if (!fd) io_failure("reopening " + temp.string());
    Sha256 hash;
    std::vector<char> buf(1 << 16);
    for (;;) {
      const auto n = ::read(fd.get(), buf.data(), buf.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        io_failure("read");
      }
      if (n == 0) break;
      hash.update(std::string_view(buf.data(), static_cast<std::size_t>(n)));
      record.size += static_cast<std::uint64_t>(n);
    }
    record.sha256 = hash.finish();
  }
  if (expected && *expected != record.sha256) {
    throw TpcException(ErrorKind::kRemoteFailure,
                       "digest mismatch: expected " + to_hex(*expected) + ", got " +
                           record.sha256_hex());
  }
  record.created_at = unix_now();

  std::unique_lock lock(mutex_);
  check_placement(path, overwrite);
  const auto existing = read_meta(path);
  const std::uint64_t old_size = existing ? existing->size : 0;
  if (capacity_ && used_ - old_size + record.size > *capacity_) {
    throw TpcException(ErrorKind::kBadRequest, "store quota exceeded");
  }
  record.generation = next_generation_++;
  const nlohmann::json meta{{"size", record.size},
                            {"sha256", record.sha256_hex()},
                            {"created_at", record.created_at},
                            {"generation", record.generation}};
  fs::rename(temp, object_file(path));
  write_file_atomically(meta_file(path), meta.dump());
  used_ = used_ - old_size + record.size;
  return record;
}

std::unique_ptr<ObjectReader> DirectoryStore::open(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  auto record = read_meta(path);
  if (!record) throw TpcException(ErrorKind::kNotFound, path.str());
  Fd fd(::open(object_file(path).c_str(), O_RDONLY | O_CLOEXEC));
  if (!fd) throw TpcException(ErrorKind::kNotFound, path.str());
  return std::make_unique<FileReader>(std::move(*record), std::move(fd));
}

ObjectRecord DirectoryStore::remove(const VirtualPath& path) {
  std::unique_lock lock(mutex_);
  auto record = read_meta(path);
  if (!record) throw TpcException(ErrorKind::kNotFound, path.str());
  fs::remove(meta_file(path));
  fs::remove(object_file(path));
  used_ -= record->size;
  prune_empty_parents(path);
  return *record;
}

void DirectoryStore::prune_empty_parents(const VirtualPath& path) const {
  std::error_code ec;
  for (auto p = path.parent(); !p.is_root(); p = p.parent()) {
    const auto dir = object_file(p);
    if (!fs::is_directory(dir, ec) || !fs::is_empty(dir, ec)) break;
    fs::remove(dir, ec);
  }
}

ObjectRecord DirectoryStore::stat(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  auto record = read_meta(path);
  if (!record) throw TpcException(ErrorKind::kNotFound, path.str());
  return *record;
}

bool DirectoryStore::is_container(const VirtualPath& path) const {
  std::shared_lock lock(mutex_);
  if (path.is_root()) return true;
  const auto dir = object_file(path);
  if (!fs::is_directory(dir)) return false;
  // Directories holding only abandoned temporaries do not count.
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().filename().string().rfind(kTempPrefix, 0) != 0) return true;
  }
  return false;
}

std::vector<ListEntry> DirectoryStore::list(const VirtualPath& path) const {
  if (!is_container(path)) {
    std::shared_lock lock(mutex_);
    if (read_meta(path)) {
      throw TpcException(ErrorKind::kBadRequest, "not a container: " + path.str());
    }
    throw TpcException(ErrorKind::kNotFound, path.str());
  }
  std::shared_lock lock(mutex_);
  std::vector<ListEntry> out;
  const auto dir = object_file(path);
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.rfind(kTempPrefix, 0) == 0 || ends_with(name, kMetaSuffix)) continue;
    ListEntry item;
    item.name = name;
    if (entry.is_directory()) {
      item.is_container = true;
    } else {
      item.record = read_meta(path.child(name));
      if (!item.record) continue;
    }
    out.push_back(std::move(item));
  }
  std::sort(out.begin(), out.end(),
            [](const ListEntry& a, const ListEntry& b) { return a.name < b.name; });
  return out;
}

std::uint64_t DirectoryStore::used_bytes() const {
  std::shared_lock lock(mutex_);
  return used_;
}

}  // namespace httptpc::store
