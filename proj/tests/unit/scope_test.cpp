#include <gtest/gtest.h>

#include <random>

#include "httptpc/core/error.hpp"
#include "httptpc/core/scope.hpp"

namespace httptpc {
namespace {

TEST(ParseScope, Examples) {
  const auto s = parse_scope("DOWNLOAD:/data/run1");
  EXPECT_EQ(s.activity, Activity::kDownload);
  EXPECT_EQ(s.path.str(), "/data/run1");

  const auto m = parse_scope("MANAGE:/a/../b");
  EXPECT_EQ(m.activity, Activity::kManage);
  EXPECT_EQ(m.path.str(), "/b");
}

TEST(ParseScope, Rejections) {
  for (const char* bad : {"download:/x", "DOWNLOAD", "FETCH:/x", "UPLOAD:/a:b", "LIST:/../x"}) {
    try {
      parse_scope(bad);
      ADD_FAILURE() << bad;
    } catch (const TpcException& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kBadRequest) << bad;
    }
  }
}

TEST(ParseScope, ExactlyFiveActivities) {
  std::vector<std::string> names;
  for (auto a : kAllActivities) names.emplace_back(to_string(a));
  EXPECT_EQ(names, (std::vector<std::string>{"UPLOAD", "DOWNLOAD", "DELETE", "MANAGE", "LIST"}));
}

TEST(ScopeProperties, RenderParseRoundTrip) {
  std::mt19937 rng(3);
  const std::vector<std::string> segs{"data", "run1", "x y", "caf\xc3\xa9", "a.b", "-"};
  for (int i = 0; i < 2000; ++i) {
    Scope s;
    s.activity = kAllActivities[rng() % kAllActivities.size()];
    for (auto d = rng() % 5; d > 0; --d) s.path = s.path.child(segs[rng() % segs.size()]);
    EXPECT_EQ(parse_scope(s.str()), s) << s.str();
  }
}

TEST(Scope, Covers) {
  const auto grant = parse_scope("DOWNLOAD:/data");
  EXPECT_TRUE(grant.covers(parse_scope("DOWNLOAD:/data/f")));
  EXPECT_FALSE(grant.covers(parse_scope("UPLOAD:/data/f")));
  EXPECT_FALSE(grant.covers(parse_scope("DOWNLOAD:/database")));
}

}  // namespace
}  // namespace httptpc
