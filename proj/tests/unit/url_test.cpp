#include <gtest/gtest.h>

#include "httptpc/core/error.hpp"
#include "httptpc/core/url.hpp"

namespace httptpc {
namespace {

TEST(Url, ParsesAbsoluteHttps) {
  const auto u = Url::parse("https://ep1:8443/data/a%20b?x=1");
  EXPECT_EQ(u.scheme, "https");
  EXPECT_EQ(u.host, "ep1");
  EXPECT_EQ(u.port, 8443);
  EXPECT_EQ(u.path, "/data/a%20b");
  EXPECT_EQ(u.query, "x=1");
  EXPECT_EQ(u.origin(), "https://ep1:8443");
  EXPECT_EQ(u.virtual_path().str(), "/data/a b");
}

TEST(Url, DefaultsAndIpv6) {
  EXPECT_EQ(Url::parse("https://h").port, 443);
  EXPECT_EQ(Url::parse("https://h").path, "/");
  const auto v6 = Url::parse("https://[::1]:9000/x");
  EXPECT_EQ(v6.host, "::1");
  EXPECT_EQ(v6.origin(), "https://[::1]:9000");
}

TEST(Url, Rejects) {
  for (const char* bad : {"/relative", "gsiftp://h/x", "https://", "https://h:0/", "https://h:99999/",
                          "https://u@h/"}) {
    EXPECT_THROW(Url::parse(bad), TpcException) << bad;
  }
}

TEST(Url, JoinEncodes) {
  EXPECT_EQ(join_url("https://h:1/", normalize_path("/a b/c")), "https://h:1/a%20b/c");
}

}  // namespace
}  // namespace httptpc
