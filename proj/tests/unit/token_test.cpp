#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "httptpc/core/error.hpp"
#include "httptpc/token/issuer.hpp"
#include "httptpc/token/token.hpp"

namespace httptpc::token {
namespace {

constexpr std::int64_t kNow = 1700000000;
const std::string kKey = "unit-root-key";
const std::string kAud = "https://ep1:8443";

Scope S(std::string_view text) { return parse_scope(text); }

AuthorizationPolicy policy_with(std::vector<Scope> grants) {
  AuthorizationPolicy p;
  p.clients["alice"] = ClientRegistration{"alice", "s3cret", {"CN=alice"}, std::move(grants)};
  return p;
}

IssuerIdentity issuer() { return {kKey, "k1", kAud, std::nullopt}; }

TransferToken issue(std::vector<std::string> scopes, std::vector<Scope> grants,
                    std::optional<std::int64_t> lifetime = std::nullopt) {
  TokenRequest req{"client_credentials", {}, "alice", lifetime};
  for (const auto& s : scopes) req.requested_scopes.push_back(S(s));
  return issue_token(req, policy_with(std::move(grants)), issuer(), kNow);
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const TpcException& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected TpcException";
  return ErrorKind::kProtocolViolation;
}

VerifyResult check(const TransferToken& t, std::string_view needed, std::int64_t now = kNow) {
  return verify(serialize_token(t), key_bytes(kKey), now, S(needed), kAud);
}

TEST(Discovery, DocumentShape) {
  const auto doc = discovery_document("https://ep1:8443");
  EXPECT_EQ(doc.dump(),
            R"({"issuer":"https://ep1:8443","token_endpoint":"https://ep1:8443/token"})");
  EXPECT_EQ(nlohmann::json::parse(doc.dump()), doc);
}

TEST(IssueToken, Examples) {
  const auto t = issue({"DOWNLOAD:/data/run1"}, {S("DOWNLOAD:/data")});
  EXPECT_EQ(t.caveats.front(), "scope:DOWNLOAD:/data/run1");
  EXPECT_TRUE(check(t, "DOWNLOAD:/data/run1"));

  EXPECT_EQ(kind_of([] { issue({"UPLOAD:/data"}, {S("DOWNLOAD:/data")}); }),
            ErrorKind::kForbidden);
  EXPECT_EQ(kind_of([] { issue({"DOWNLOAD:/database"}, {S("DOWNLOAD:/data")}); }),
            ErrorKind::kForbidden);
  EXPECT_EQ(kind_of([] { issue({}, {S("DOWNLOAD:/data")}); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([] {
              TokenRequest req{"authorization_code", {S("DOWNLOAD:/data")}, "alice", {}};
              issue_token(req, policy_with({S("DOWNLOAD:/")}), issuer(), kNow);
            }),
            ErrorKind::kBadRequest);
}

TEST(IssueToken, LifetimeClamping) {
  auto before_of = [](const TransferToken& t) {
    for (const auto& c : t.caveats) {
      if (c.rfind("before:", 0) == 0) return parse_rfc3339(c.substr(7));
    }
    return std::int64_t{0};
  };
  EXPECT_EQ(before_of(issue({"LIST:/"}, {S("LIST:/")})), kNow + 3600);
  EXPECT_EQ(before_of(issue({"LIST:/"}, {S("LIST:/")}, 60)), kNow + 60);
  EXPECT_EQ(before_of(issue({"LIST:/"}, {S("LIST:/")}, 10 * 86400)), kNow + 86400);
}

TEST(Verify, Examples) {
  const auto t = issue({"DOWNLOAD:/data"}, {S("DOWNLOAD:/")});
  EXPECT_TRUE(check(t, "DOWNLOAD:/data/f"));

  auto corrupted = t;
  corrupted.signature[7] ^= 0x01;
  EXPECT_EQ(check(corrupted, "DOWNLOAD:/data/f").reason, VerifyFailure::kBadSignature);

  const auto expired = check(t, "DOWNLOAD:/data/f", kNow + 4000);
  EXPECT_FALSE(expired);
  EXPECT_EQ(expired.reason, VerifyFailure::kExpired);

  const auto attenuated = attenuate(t, "scope:DOWNLOAD:/data/run1");
  EXPECT_EQ(check(attenuated, "DOWNLOAD:/data/run2").reason, VerifyFailure::kScopeDenied);
  EXPECT_TRUE(check(attenuated, "DOWNLOAD:/data/run1/x"));
}

TEST(Verify, ExpiryIsStrict) {
  const auto t = issue({"DOWNLOAD:/data"}, {S("DOWNLOAD:/")});
  EXPECT_TRUE(check(t, "DOWNLOAD:/data", kNow + 3599));
  EXPECT_EQ(check(t, "DOWNLOAD:/data", kNow + 3600).reason, VerifyFailure::kExpired);
}

TEST(Verify, AudienceAndMalformed) {
  auto t = attenuate(issue({"DOWNLOAD:/data"}, {S("DOWNLOAD:/")}), audience_caveat(kAud));
  EXPECT_TRUE(check(t, "DOWNLOAD:/data"));
  t = attenuate(t, audience_caveat("https://other:1"));
  EXPECT_EQ(check(t, "DOWNLOAD:/data").reason, VerifyFailure::kWrongAudience);

  EXPECT_EQ(verify("not-a-token", key_bytes(kKey), kNow, S("LIST:/"), kAud).reason,
            VerifyFailure::kMalformed);
  // Correctly signed but missing the mandatory expiry.
  const auto no_expiry = mint(key_bytes(kKey), kAud, "k1", {"scope:LIST:/"});
  EXPECT_EQ(check(no_expiry, "LIST:/").reason, VerifyFailure::kMalformed);
  const auto unknown = mint(key_bytes(kKey), kAud, "k1",
                            {"scope:LIST:/", before_caveat(kNow + 10), "colour:blue"});
  EXPECT_EQ(check(unknown, "LIST:/").reason, VerifyFailure::kMalformed);
}

TEST(Verify, UnionWithinIssuedGroup) {
  const auto t = issue({"DOWNLOAD:/data", "UPLOAD:/staging"}, {S("DOWNLOAD:/"), S("UPLOAD:/")});
  EXPECT_TRUE(check(t, "DOWNLOAD:/data/x"));
  EXPECT_TRUE(check(t, "UPLOAD:/staging/y"));
  EXPECT_FALSE(check(t, "UPLOAD:/data/x"));
}

// Oracle: each scope denotes the set of (activity, path) pairs it covers
// within a finite universe; the authorized set of a token is the
// intersection of its groups' sets.
TEST(Verify, IntersectionSemanticsBruteForce) {
  const std::vector<std::string> paths{"/data", "/data/run1", "/data/run2"};
  auto covered = [&](const std::string& grant) {
    std::set<std::string> out;
    for (const auto& p : paths) {
      if (p == grant || p.rfind(grant + "/", 0) == 0) out.insert(p);
    }
    return out;
  };
  for (const auto& original : paths) {
    for (const auto& added : paths) {
      std::set<std::string> expected;
      const auto a = covered(original);
      const auto b = covered(added);
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                            std::inserter(expected, expected.begin()));
      const auto t = attenuate(issue({"DOWNLOAD:" + original}, {S("DOWNLOAD:/")}),
                               "scope:DOWNLOAD:" + added);
      for (const auto& needed : paths) {
        const auto r = check(t, "DOWNLOAD:" + needed);
        EXPECT_EQ(static_cast<bool>(r), expected.count(needed) == 1)
            << original << " & " << added << " -> " << needed;
        if (!r) EXPECT_EQ(r.reason, VerifyFailure::kScopeDenied);
      }
    }
  }
}

TEST(Attenuate, ExpiryTighteningAndChain) {
  const auto t = issue({"DOWNLOAD:/data"}, {S("DOWNLOAD:/")});
  const auto tighter = attenuate(t, before_caveat(kNow + 10));
  EXPECT_TRUE(check(tighter, "DOWNLOAD:/data", kNow + 9));
  EXPECT_EQ(check(tighter, "DOWNLOAD:/data", kNow + 10).reason, VerifyFailure::kExpired);
  EXPECT_TRUE(check(t, "DOWNLOAD:/data", kNow + 10));
  EXPECT_NE(tighter.signature, t.signature);
  EXPECT_EQ(tighter.signature,
            chain_signature(key_bytes(kKey), tighter.key_id, tighter.caveats));
  EXPECT_EQ(kind_of([&] { attenuate(t, "before:tomorrow"); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([&] { attenuate(t, "scope:download:/x"); }), ErrorKind::kBadRequest);
  EXPECT_EQ(kind_of([&] { attenuate(t, kGroupSentinel); }), ErrorKind::kBadRequest);
}

TEST(Serialize, RoundTripAndAlphabet) {
  const auto t = attenuate(issue({"DOWNLOAD:/data", "UPLOAD:/x y"}, {S("DOWNLOAD:/"), S("UPLOAD:/")}),
                           "scope:DOWNLOAD:/data/run1");
  const auto text = serialize_token(t);
  EXPECT_EQ(parse_token(text), t);
  EXPECT_EQ(text.find_first_of("+/= \t\r\n"), std::string::npos);
  EXPECT_EQ(kind_of([&] { parse_token(text.substr(0, text.size() - 3)); }), ErrorKind::kBadRequest);
  EXPECT_EQ(verify(text.substr(0, text.size() / 2), key_bytes(kKey), kNow, S("DOWNLOAD:/data"), kAud)
                .reason,
            VerifyFailure::kMalformed);
}

TEST(Serialize, GoldenFileMatchesIndependentOracle) {
  std::ifstream in(std::string(HTTPTPC_GOLDEN_DIR) + "/token_attenuated.txt");
  std::string golden;
  std::getline(in, golden);
  const auto base = mint(key_bytes("golden-root-key"), "https://ep1:8443", "k1",
                         {"scope:DOWNLOAD:/data", "scope:UPLOAD:/staging",
                          "before:2024-01-01T00:00:00Z"});
  const auto t = attenuate(base, "scope:DOWNLOAD:/data/run1");
  EXPECT_EQ(serialize_token(t), golden);
  EXPECT_EQ(parse_token(golden), t);
  const std::string aud = "https://ep1:8443";
  const auto r = verify(golden, key_bytes("golden-root-key"), 1700000000 - 10 * 365 * 86400,
                        S("DOWNLOAD:/data/run1/f"), aud);
  EXPECT_TRUE(r) << r.detail;
}

TEST(Rfc3339, FormatAndStrictParse) {
  EXPECT_EQ(format_rfc3339(1704067200), "2024-01-01T00:00:00Z");
  EXPECT_EQ(parse_rfc3339("2024-01-01T00:00:00Z"), 1704067200);
  for (const char* bad : {"2024-13-01T00:00:00Z", "2024-01-01 00:00:00Z", "2024-01-01T00:00:00",
                          "2024-02-30T00:00:00Z"}) {
    EXPECT_THROW(parse_rfc3339(bad), TpcException) << bad;
  }
}

TEST(TokenEndpoint, Requests) {
  TokenService svc(policy_with({S("DOWNLOAD:/data"), S("UPLOAD:/staging")}), issuer());
  TokenHttpRequest req;
  req.method = "POST";
  req.content_type = "application/x-www-form-urlencoded";
  req.authorization = "Basic " + base64_encode(std::string_view("alice:s3cret"));
  req.body = "grant_type=client_credentials&scope=DOWNLOAD%3A%2Fdata+UPLOAD:/staging";
  auto r = svc.handle_token_request(req, kNow);
  ASSERT_EQ(r.status, 200) << r.body.dump();
  EXPECT_EQ(r.body.at("token_type"), "bearer");
  EXPECT_EQ(r.body.at("expires_in"), 3600);
  const auto t = parse_token(r.body.at("access_token").get<std::string>());
  EXPECT_EQ(std::count_if(t.caveats.begin(), t.caveats.end(),
                          [](const std::string& c) { return c.rfind("scope:", 0) == 0; }),
            2);

  auto wrong_grant = req;
  wrong_grant.body = "grant_type=authorization_code&scope=DOWNLOAD:/data";
  EXPECT_EQ(svc.handle_token_request(wrong_grant, kNow).status, 400);

  auto unknown = req;
  unknown.authorization = "Basic " + base64_encode(std::string_view("mallory:x"));
  EXPECT_EQ(svc.handle_token_request(unknown, kNow).status, 401);

  auto bad_secret = req;
  bad_secret.authorization = "Basic " + base64_encode(std::string_view("alice:wrong"));
  EXPECT_EQ(svc.handle_token_request(bad_secret, kNow).status, 401);

  auto denied = req;
  denied.body = "grant_type=client_credentials&scope=DELETE:/data";
  EXPECT_EQ(svc.handle_token_request(denied, kNow).status, 403);

  auto bad_scope = req;
  bad_scope.body = "grant_type=client_credentials&scope=delete:/data";
  EXPECT_EQ(svc.handle_token_request(bad_scope, kNow).status, 400);

  auto by_cert = req;
  by_cert.authorization.clear();
  by_cert.peer_subject = "CN=alice";
  EXPECT_EQ(svc.handle_token_request(by_cert, kNow).status, 200);
  by_cert.peer_subject = "CN=bob";
  EXPECT_EQ(svc.handle_token_request(by_cert, kNow).status, 401);
}

TEST(Form, Decode) {
  const auto f = parse_form("a=1&b=x+y&c=%2F&d");
  EXPECT_EQ(f.at("a"), "1");
  EXPECT_EQ(f.at("b"), "x y");
  EXPECT_EQ(f.at("c"), "/");
  EXPECT_EQ(f.at("d"), "");
  EXPECT_EQ(parse_form(form_encode("DOWNLOAD:/a b UPLOAD:/c&d")).size(), 1u);
}

}  // namespace
}  // namespace httptpc::token
