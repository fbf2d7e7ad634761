#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <thread>

#include "httptpc/core/error.hpp"
#include "httptpc/store/directory_store.hpp"
#include "httptpc/store/memory_store.hpp"

namespace httptpc::store {
namespace {

namespace fs = std::filesystem;

VirtualPath P(std::string_view s) { return normalize_path(s); }

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const TpcException& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected TpcException";
  return ErrorKind::kProtocolViolation;
}

class StoreTest : public ::testing::TestWithParam<Backend> {
 protected:
  void SetUp() override { store_ = make(std::nullopt); }

  void TearDown() override {
    store_.reset();
    if (!dir_.empty()) fs::remove_all(dir_);
  }

  std::shared_ptr<ObjectStore> make(std::optional<std::uint64_t> capacity) {
    StoreConfig cfg;
    cfg.backend = GetParam();
    cfg.capacity_bytes = capacity;
    if (cfg.backend == Backend::kDirectory) {
      if (dir_.empty()) {
        dir_ = fs::temp_directory_path() /
               ("httptpc-store-" + std::to_string(::getpid()) + "-" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
      }
      cfg.root = dir_;
    }
    return make_store(cfg);
  }

  fs::path dir_;
  std::shared_ptr<ObjectStore> store_;
};

// Digest values computed independently with coreutils sha256sum.
TEST_P(StoreTest, PutRecordsSizeAndDigest) {
  const auto rec = store_->put(P("/a/f"), "abcd", false);
  EXPECT_EQ(rec.size, 4u);
  EXPECT_EQ(rec.sha256_hex(), "88d4266fd4e6338d13b845fcf289579d209c897823b9217da3e161936f031589");
  const auto empty = store_->put(P("/a/f"), "", true);
  EXPECT_EQ(empty.size, 0u);
  EXPECT_EQ(empty.sha256_hex(),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_GT(empty.generation, rec.generation);
}

TEST_P(StoreTest, CreateOnlyPutConflictsWithoutModification) {
  const auto first = store_->put(P("/a/f"), "abcd", false);
  EXPECT_EQ(kind_of([&] { store_->put(P("/a/f"), "zz", false); }), ErrorKind::kConflict);
  EXPECT_EQ(store_->get(P("/a/f")).data, "abcd");
  EXPECT_EQ(store_->stat(P("/a/f")), first);
}

TEST_P(StoreTest, CreateOnlyRaceDetectedAtCommit) {
  auto w1 = store_->begin_put(P("/r"), false);
  auto w2 = store_->begin_put(P("/r"), false);
  w1->append("one");
  w2->append("two");
  w1->commit();
  EXPECT_EQ(kind_of([&] { w2->commit(); }), ErrorKind::kConflict);
  EXPECT_EQ(store_->get(P("/r")).data, "one");
}

TEST_P(StoreTest, RangedGet) {
  store_->put(P("/a/f"), "abcd", false);
  EXPECT_EQ(store_->get(P("/a/f"), ByteRange{1, 3}).data, "bc");
  EXPECT_EQ(kind_of([&] { store_->get(P("/a/f"), ByteRange{3, 3}); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([&] { store_->get(P("/a/f"), ByteRange{0, 5}); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([&] { store_->get(P("/missing")); }), ErrorKind::kNotFound);
}

TEST_P(StoreTest, PartitionConcatenationEqualsWhole) {
  std::mt19937 rng(5);
  std::string content(10000, '\0');
  for (auto& c : content) c = static_cast<char>(rng());
  store_->put(P("/big"), content, false);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::uint64_t> cuts{0, content.size()};
    for (int k = 0; k < 5; ++k) cuts.push_back(1 + rng() % (content.size() - 1));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    std::string joined;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
      joined += store_->get(P("/big"), ByteRange{cuts[i], cuts[i + 1]}).data;
    }
    EXPECT_EQ(joined, content);
  }
}

TEST_P(StoreTest, RoundTripDigestProperty) {
  std::mt19937 rng(9);
  for (int i = 0; i < 50; ++i) {
    std::string b(rng() % 5000, '\0');
    for (auto& c : b) c = static_cast<char>(rng());
    const auto path = P("/prop/o" + std::to_string(i));
    const auto rec = store_->put(path, b, false);
    const auto got = store_->get(path);
    EXPECT_EQ(got.data, b);
    EXPECT_EQ(to_hex(sha256(got.data)), rec.sha256_hex());
  }
}

TEST_P(StoreTest, StripedWritesOutOfOrder) {
  auto w = store_->begin_put(P("/striped"), false);
  std::vector<std::thread> threads;
  const std::string content = "0123456789abcdefghijklmnopqrstuv";
  for (int s = 3; s >= 0; --s) {
    threads.emplace_back([&, s] {
      w->write_at(s * 8, std::span(content.data() + s * 8, 8));
    });
  }
  for (auto& t : threads) t.join();
  const auto rec = w->commit(sha256(content));
  EXPECT_EQ(rec.size, content.size());
  EXPECT_EQ(store_->get(P("/striped")).data, content);
}

TEST_P(StoreTest, CommitRejectsDigestMismatch) {
  auto w = store_->begin_put(P("/x"), false);
  w->append("abcd");
  EXPECT_EQ(kind_of([&] { w->commit(sha256("abce")); }), ErrorKind::kRemoteFailure);
  w.reset();
  EXPECT_EQ(kind_of([&] { store_->stat(P("/x")); }), ErrorKind::kNotFound);
}

TEST_P(StoreTest, AbandonedWriteLeavesNothing) {
  {
    auto w = store_->begin_put(P("/gone/x"), false);
    w->append("data");
  }
  EXPECT_EQ(kind_of([&] { store_->stat(P("/gone/x")); }), ErrorKind::kNotFound);
  EXPECT_TRUE(store_->list(P("/")).empty());
}

TEST_P(StoreTest, ListDeleteStat) {
  EXPECT_TRUE(store_->list(P("/")).empty());
  store_->put(P("/d/x"), "1", false);
  store_->put(P("/d/y"), "22", false);
  store_->put(P("/d/sub/z"), "333", false);
  const auto entries = store_->list(P("/d"));
  ASSERT_EQ(entries.size(), 3u);
  EXPECT_EQ(entries[0].name, "sub");
  EXPECT_TRUE(entries[0].is_container);
  EXPECT_EQ(entries[1].name, "x");
  EXPECT_FALSE(entries[1].is_container);
  ASSERT_TRUE(entries[2].record);
  EXPECT_EQ(entries[2].record->size, 2u);
  EXPECT_EQ(kind_of([&] { store_->list(P("/d/x")); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([&] { store_->list(P("/nope")); }), ErrorKind::kNotFound);

  const auto removed = store_->remove(P("/d/x"));
  EXPECT_EQ(removed.size, 1u);
  EXPECT_EQ(kind_of([&] { store_->stat(P("/d/x")); }), ErrorKind::kNotFound);
  EXPECT_EQ(kind_of([&] { store_->remove(P("/d/x")); }), ErrorKind::kNotFound);
  store_->remove(P("/d/sub/z"));
  EXPECT_FALSE(store_->is_container(P("/d/sub")));
  EXPECT_TRUE(store_->is_container(P("/d")));
}

TEST_P(StoreTest, ObjectsAndContainersDoNotOverlap) {
  store_->put(P("/a/b"), "x", false);
  EXPECT_EQ(kind_of([&] { store_->put(P("/a"), "y", true); }), ErrorKind::kConflict);
  EXPECT_EQ(kind_of([&] { store_->put(P("/a/b/c"), "y", true); }), ErrorKind::kConflict);
  EXPECT_EQ(kind_of([&] { store_->put(P("/"), "y", true); }), ErrorKind::kBadRequest);
}

TEST_P(StoreTest, QuotaNeverExceeded) {
  store_.reset();
  store_ = make(100);
  std::mt19937 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto path = P("/q/" + std::to_string(rng() % 8));
    try {
      if (rng() % 3 == 0) {
        store_->remove(path);
      } else {
        store_->put(path, std::string(rng() % 60, 'q'), true);
      }
    } catch (const TpcException& e) {
      EXPECT_TRUE(e.kind() == ErrorKind::kBadRequest || e.kind() == ErrorKind::kNotFound);
    }
    EXPECT_LE(store_->used_bytes(), 100u);
  }
}

TEST_P(StoreTest, ReadersSeeWholeGenerations) {
  const std::string a(1 << 16, 'a');
  const std::string b(1 << 16, 'b');
  store_->put(P("/race"), a, false);
  std::atomic<bool> stop{false};
  std::thread writer([&] {
    for (int i = 0; i < 200 && !stop; ++i) store_->put(P("/race"), (i % 2) ? a : b, true);
  });
  for (int i = 0; i < 300; ++i) {
    auto reader = store_->open(P("/race"));
    const auto gen = reader->record().generation;
    std::string got(reader->record().size, '\0');
    std::size_t done = 0;
    while (done < got.size()) {
      const auto n = reader->read(done, std::span(got.data() + done, got.size() - done));
      ASSERT_GT(n, 0u);
      done += n;
    }
    EXPECT_TRUE(got == a || got == b);
    EXPECT_EQ(to_hex(sha256(got)), reader->record().sha256_hex());
    EXPECT_EQ(reader->record().generation, gen);
  }
  stop = true;
  writer.join();
}

INSTANTIATE_TEST_SUITE_P(Backends, StoreTest,
                         ::testing::Values(Backend::kInMemory, Backend::kDirectory),
                         [](const auto& info) {
                           return info.param == Backend::kInMemory ? "Memory" : "Directory";
                         });

TEST(DirectoryStore, SidecarLayout) {
  const auto dir = fs::temp_directory_path() / ("httptpc-sidecar-" + std::to_string(::getpid()));
  fs::remove_all(dir);
  {
    DirectoryStore store(dir, std::nullopt);
    const auto rec = store.put(P("/d/f"), "abcd", false);
    std::ifstream data(dir / "d" / "f");
    std::string content((std::istreambuf_iterator<char>(data)), {});
    EXPECT_EQ(content, "abcd");
    std::ifstream meta_in(dir / "d" / "f.meta");
    const auto meta = nlohmann::json::parse(meta_in);
    EXPECT_EQ(meta.at("size"), 4);
    EXPECT_EQ(meta.at("sha256"), rec.sha256_hex());
    EXPECT_EQ(meta.at("generation"), rec.generation);
    EXPECT_EQ(meta.at("created_at"), rec.created_at);
    EXPECT_EQ(meta.size(), 4u);
    EXPECT_EQ(kind_of([&] { store.put(P("/d/x.meta"), "1", false); }), ErrorKind::kBadRequest);
  }
  {
    // Reopening rediscovers usage and keeps generations increasing.
    DirectoryStore store(dir, std::nullopt);
    EXPECT_EQ(store.used_bytes(), 4u);
    const auto before = store.stat(P("/d/f")).generation;
    EXPECT_GT(store.put(P("/d/f"), "z", true).generation, before);
  }
  fs::remove_all(dir);
}

}  // namespace
}  // namespace httptpc::store
