#include <gtest/gtest.h>

#include "darkdns/rdap.hpp"
#include "darkdns/sim/mock_rdap.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using testing_support::kT0;

const RegistrableDomain kDom = RegistrableDomain::from_parts("live", "com");

RdapRecord record_at(Timestamp reg) {
  RdapRecord r;
  r.domain = kDom;
  r.registration_ts = reg;
  return r;
}

TEST(Validate, BoundaryAgainstAbsoluteLagOracle) {
  for (std::int64_t lag = -86400 - 3; lag <= 86400 + 3; lag += (std::llabs(lag) > 86390 ? 1 : 4321)) {
    const auto v = validate(CandidateNRD{kDom, kT0 + Duration{lag}, "log"}, record_at(kT0));
    EXPECT_EQ(v.verdict, std::llabs(lag) <= 86400 ? Verdict::Confirmed : Verdict::Misclassified) << lag;
    EXPECT_EQ(v.lag.count(), lag);
  }
}

TEST(Validate, ExactBoundaries) {
  EXPECT_EQ(validate(CandidateNRD{kDom, kT0 + 24h, "l"}, record_at(kT0)).verdict, Verdict::Confirmed);
  EXPECT_EQ(validate(CandidateNRD{kDom, kT0 + 24h + 1s, "l"}, record_at(kT0)).verdict, Verdict::Misclassified);
}

TEST(Validate, DomainMismatchRejected) {
  RdapRecord other = record_at(kT0);
  other.domain = RegistrableDomain::from_parts("other", "com");
  try {
    validate(CandidateNRD{kDom, kT0, "l"}, other);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DomainMismatch);
  }
}

TEST(Bootstrap, PrefersHttpsAndFallsBackToLastLabel) {
  const auto b = RdapBootstrap::parse(R"({"version":"1.0","services":[
      [["com","net"],["http://rdap.verisign.test/","https://rdap.verisign.test/"]],
      [["uk"],["https://rdap.nominet.test/"]]]})");
  EXPECT_EQ(b.base_url("com"), "https://rdap.verisign.test/");
  EXPECT_EQ(b.base_url("co.uk"), "https://rdap.nominet.test/");
  EXPECT_EQ(b.base_url("xyz"), std::nullopt);
  EXPECT_EQ(RdapBootstrap::parse(b.to_json_text()).base_url("net"), "https://rdap.verisign.test/");
  EXPECT_THROW(RdapBootstrap::parse(R"({"services":[["com"]]})"), Error);
}

TEST(Bootstrap, BundledFileLoads) {
  const auto b = RdapBootstrap::load(std::string(DARKDNS_SOURCE_DIR) + "/data/rdap_bootstrap.json");
  EXPECT_TRUE(b.base_url("com"));
}

TEST(ParseDomain, ExtractsRegistrationAndRegistrar) {
  const auto rec = parse_rdap_domain(R"({"objectClassName":"domain","ldhName":"LIVE.COM","status":["active"],
      "events":[{"eventAction":"last changed","eventDate":"2023-11-03T00:00:00Z"},
                {"eventAction":"registration","eventDate":"2023-11-02T10:00:00Z"}],
      "entities":[{"roles":["technical"],"vcardArray":["vcard",[["fn",{},"text","Not Me"]]]},
                  {"roles":["registrar"],"vcardArray":["vcard",[["version",{},"text","4.0"],["fn",{},"text","Reg Co"]]],
                   "publicIds":[{"type":"IANA Registrar ID","identifier":"1068"}]}]})",
                                     kDom, kT0 + 1h);
  EXPECT_EQ(rec.registration_ts, kT0);
  EXPECT_EQ(rec.registrar_name, "Reg Co");
  EXPECT_EQ(rec.registrar_iana_id, 1068);
  EXPECT_EQ(rec.raw_status, std::vector<std::string>{"active"});
  EXPECT_EQ(rec.fetched_at, kT0 + 1h);
  EXPECT_THROW(parse_rdap_domain(R"({"events":[]})", kDom, kT0), Error);
  EXPECT_THROW(parse_rdap_domain("<html>", kDom, kT0), Error);
}

class ScriptedHttp final : public HttpTransport {
 public:
  HttpResult get(const std::string& url) override {
    urls.push_back(url);
    return next;
  }
  HttpResult next;
  std::vector<std::string> urls;
};

class ClientTest : public testing::Test {
 protected:
  ClientTest() : clock_(kT0), limiter_(10.0) { boot_.add("com", "https://rdap.test/com/"); }
  RdapClient client() { return RdapClient(boot_, http_, limiter_, clock_); }
  static HttpResult status(int s, std::string body = "", std::map<std::string, std::string> headers = {}) {
    HttpResult r;
    r.response = HttpResponse{s, std::move(body), std::move(headers)};
    return r;
  }

  VirtualClock clock_;
  EndpointRateLimiter limiter_;
  RdapBootstrap boot_;
  ScriptedHttp http_;
};

TEST_F(ClientTest, FailureShapes) {
  auto c = client();
  http_.next = status(404);
  auto out = c.fetch_rdap(kDom);
  ASSERT_TRUE(std::holds_alternative<RdapFailure>(out));
  EXPECT_TRUE(std::get<RdapFailure>(out).not_found);
  EXPECT_EQ(http_.urls.back(), "https://rdap.test/com/domain/live.com");

  http_.next = status(429, "", {{"Retry-After", "30"}});
  out = c.fetch_rdap(kDom);
  EXPECT_EQ(std::get<RdapFailure>(out).http_status, 429);
  EXPECT_FALSE(std::get<RdapFailure>(out).not_found);
  EXPECT_NE(std::get<RdapFailure>(out).evidence.find("Retry-After: 30"), std::string::npos);

  http_.next = HttpResult{std::nullopt, "connection refused"};
  EXPECT_EQ(std::get<RdapFailure>(c.fetch_rdap(kDom)).cause, RdapFailureCause::TransportOrRateLimit);

  http_.next = status(200, "{}");
  EXPECT_NE(std::get<RdapFailure>(c.fetch_rdap(kDom)).evidence.find("malformed"), std::string::npos);

  const auto unknown = RegistrableDomain::from_parts("x", "zz");
  EXPECT_EQ(std::get<RdapFailure>(c.fetch_rdap(unknown)).http_status, 0);
  EXPECT_EQ(c.requests_sent(), 4u);
}

TEST_F(ClientTest, TryFetchHonoursLimiterWithoutSending) {
  auto c = client();
  http_.next = status(404);
  EXPECT_TRUE(c.try_fetch(kDom));
  EXPECT_FALSE(c.try_fetch(kDom));
  EXPECT_EQ(http_.urls.size(), 1u);
  EXPECT_EQ(c.next_allowed(kDom), kT0 + 6s);
  clock_.advance(6s);
  EXPECT_TRUE(c.try_fetch(kDom));
}

class NoHistory final : public HistoricalZoneView {
 public:
  explicit NoHistory(bool existed) : existed_(existed) {}
  bool existed_before(const std::string&, std::string_view, Date) const override { return existed_; }

 private:
  bool existed_;
};

TEST(ClassifyFailure, ThreeCauses) {
  RdapFailure nf;
  nf.not_found = true;
  nf.http_status = 404;
  const Date cutoff = parse_date("2023-11-01");

  const auto dead = classify_failure(kDom, nf, NoHistory(true), cutoff, std::nullopt);
  ASSERT_TRUE(dead);
  EXPECT_EQ(dead->cause, RdapFailureCause::NonexistentWithCert);
  EXPECT_EQ(dead->historical_presence, true);

  EXPECT_EQ(classify_failure(kDom, nf, NoHistory(false), cutoff, std::nullopt), std::nullopt);

  DelayedProbeEvidence found{true, kT0, false, ""};
  EXPECT_EQ(classify_failure(kDom, nf, NoHistory(false), cutoff, found)->cause, RdapFailureCause::NotYetSynced);
  DelayedProbeEvidence resolving{false, std::nullopt, true, ""};
  EXPECT_EQ(classify_failure(kDom, nf, NoHistory(false), cutoff, resolving)->cause, RdapFailureCause::NotYetSynced);
  DelayedProbeEvidence gone{false, std::nullopt, false, "NXDOMAIN"};
  const auto late = classify_failure(kDom, nf, NoHistory(false), cutoff, gone);
  EXPECT_EQ(late->cause, RdapFailureCause::TooLate);
  EXPECT_EQ(late->historical_presence, false);

  RdapFailure transport;
  transport.http_status = 503;
  EXPECT_EQ(classify_failure(kDom, transport, NoHistory(true), cutoff, std::nullopt)->cause,
            RdapFailureCause::TransportOrRateLimit);
}

TEST(RdapJson, RoundTrips) {
  RdapRecord r = record_at(kT0);
  r.registrar_name = "Reg";
  r.registrar_iana_id = 5;
  r.fetched_at = kT0 + 1h;
  const auto back = rdap_record_from_json(to_json(r));
  EXPECT_EQ(back.domain, r.domain);
  EXPECT_EQ(back.registration_ts, r.registration_ts);
  EXPECT_EQ(back.registrar_iana_id, 5);
  RdapFailure f;
  f.domain = kDom;
  f.cause = RdapFailureCause::TooLate;
  f.historical_presence = false;
  f.at = kT0;
  const auto fb = rdap_failure_from_json(to_json(f));
  EXPECT_EQ(fb.cause, RdapFailureCause::TooLate);
  EXPECT_EQ(fb.historical_presence, false);
}

TEST(MockRdap, ScriptedAvailabilityOverLoopback) {
  const auto sc = testing_support::hand_scenario();
  sim::World world(sc);
  VirtualClock clock(kT0 + 30min);
  sim::MockRdapService service(world, clock);
  sim::MockRdapServer server(service);
  HttplibTransport http(std::chrono::seconds(5));
  EndpointRateLimiter limiter(600.0);
  RdapBootstrap boot;
  boot.add("com", server.base_url("com"));
  RdapClient client(boot, http, limiter, clock);

  const auto live = client.fetch_rdap(RegistrableDomain::from_parts("live", "com"));
  ASSERT_TRUE(std::holds_alternative<RdapRecord>(live));
  EXPECT_EQ(std::get<RdapRecord>(live).registration_ts, kT0);
  EXPECT_EQ(std::get<RdapRecord>(live).registrar_name, "Example Registrar, Inc.");
  EXPECT_EQ(std::get<RdapRecord>(live).registrar_iana_id, 9999);

  EXPECT_TRUE(std::get<RdapFailure>(client.fetch_rdap(RegistrableDomain::from_parts("lagging", "com"))).not_found);
  clock.set(kT0 + 2h);
  EXPECT_TRUE(std::get<RdapFailure>(client.fetch_rdap(RegistrableDomain::from_parts("purged", "com"))).not_found);
  EXPECT_TRUE(std::holds_alternative<RdapRecord>(client.fetch_rdap(RegistrableDomain::from_parts("brief", "com"))));
  clock.set(kT0 + 5h);
  EXPECT_TRUE(std::holds_alternative<RdapRecord>(client.fetch_rdap(RegistrableDomain::from_parts("lagging", "com"))));

  EXPECT_EQ(service.total(), 5u);
  EXPECT_EQ(service.hits("lagging.com"), 2u);
}

}  // namespace
}  // namespace darkdns
