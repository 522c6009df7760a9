#include <gtest/gtest.h>

#include "darkdns/dns/resolver.hpp"
#include "darkdns/sim/mock_dns.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using testing_support::kT0;

std::vector<std::uint8_t> bytes(std::initializer_list<int> v) { return {v.begin(), v.end()}; }

// id 0x1234, RD, one question example.com/A/IN
const std::vector<std::uint8_t> kQueryWire = bytes({0x12, 0x34, 0x01, 0x00, 0, 1, 0, 0, 0, 0, 0, 0,
                                                    7, 'e', 'x', 'a', 'm', 'p', 'l', 'e', 3, 'c', 'o', 'm', 0,
                                                    0, 1, 0, 1});

TEST(Wire, EncodesKnownQueryBytes) {
  dns::Message q;
  q.header.id = 0x1234;
  q.header.rd = true;
  q.questions.push_back({"example.com", dns::type::A, dns::kClassIn});
  EXPECT_EQ(dns::encode(q), kQueryWire);
  const auto d = dns::decode(kQueryWire);
  EXPECT_EQ(d.header.id, 0x1234);
  EXPECT_TRUE(d.header.rd);
  EXPECT_FALSE(d.header.qr);
  EXPECT_EQ(d.questions.at(0).name, "example.com");
}

TEST(Wire, EdnsOptRecordAppended) {
  const auto q = dns::make_query(7, "example.com", dns::type::AAAA, false);
  const auto wire = dns::encode(q);
  ASSERT_EQ(wire.size(), kQueryWire.size() + 11);
  EXPECT_EQ(wire[11], 1);  // ARCOUNT
  EXPECT_EQ(wire[kQueryWire.size() + 3], 1232 >> 8);
  EXPECT_EQ(dns::decode(wire).edns_payload, 1232);
}

TEST(Wire, CompressionShrinksAndRoundTrips) {
  auto r = dns::make_response(dns::make_query(9, "example.com", dns::type::NS, false), dns::Rcode::NoError);
  r.authority.push_back(dns::make_ns("example.com", "ns1.example.com", 300));
  r.authority.push_back(dns::make_ns("example.com", "ns2.example.com", 300));
  r.answers.push_back(dns::make_a("example.com", "192.0.2.7", 60));
  r.answers.push_back(dns::make_aaaa("example.com", "2001:db8::1", 60));
  const auto packed = dns::encode(r, true);
  const auto plain = dns::encode(r, false);
  EXPECT_LT(packed.size(), plain.size());
  for (const auto& wire : {packed, plain}) {
    const auto d = dns::decode(wire);
    ASSERT_EQ(d.authority.size(), 2u);
    EXPECT_EQ(d.authority[1].text, "ns2.example.com");
    EXPECT_EQ(d.answers[0].text, "192.0.2.7");
    EXPECT_EQ(d.answers[1].text, "2001:db8::1");
    EXPECT_EQ(d.answers[0].ttl, 60u);
    EXPECT_TRUE(d.header.qr);
  }
}

TEST(Wire, MalformedInputIsParseError) {
  auto loop = bytes({0, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0xC0, 12, 0, 1, 0, 1});
  auto cut = kQueryWire;
  cut.resize(cut.size() - 3);
  auto overrun = kQueryWire;
  overrun[12] = 60;
  for (const auto& wire : {loop, cut, overrun, bytes({1, 2, 3})}) {
    try {
      dns::decode(wire);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ParseError);
    }
  }
  EXPECT_THROW(dns::encode(dns::make_query(1, std::string(64, 'a') + ".com", dns::type::A, false)), Error);
}

class FatHandler final : public dns::WireHandler {
 public:
  std::optional<std::vector<std::uint8_t>> handle_wire(std::span<const std::uint8_t> wire, bool over_tcp) override {
    const auto q = dns::decode(wire);
    (over_tcp ? tcp : udp)++;
    auto r = dns::make_response(q, dns::Rcode::NoError);
    for (int i = 0; i < 120; ++i) r.answers.push_back(dns::make_a("fat.example", "10.0.0." + std::to_string(i), 30));
    return over_tcp ? dns::encode(r) : dns::detail::fit_udp(q, r);
  }
  std::atomic<int> udp{0};
  std::atomic<int> tcp{0};
};

TEST(Transport, OversizeUdpTruncatesThenFallsBackToTcp) {
  const auto q = dns::make_query(3, "fat.example", dns::type::A, true);
  FatHandler h;
  const auto truncated = dns::decode(*h.handle_wire(dns::encode(q), false));
  EXPECT_TRUE(truncated.header.tc);
  EXPECT_TRUE(truncated.answers.empty());

  dns::DnsSocketServer server(h);
  dns::UdpDnsTransport udp;
  const auto reply = udp.query(server.endpoint(), q, 2000ms);
  ASSERT_TRUE(reply);
  EXPECT_FALSE(reply->header.tc);
  EXPECT_EQ(reply->answers.size(), 120u);
  EXPECT_EQ(h.udp, 2);
  EXPECT_EQ(h.tcp, 1);

  dns::InProcessDnsTransport inproc;
  inproc.attach(server.endpoint(), h);
  EXPECT_EQ(inproc.query(server.endpoint(), q, 0ms)->answers.size(), 120u);
  EXPECT_FALSE(inproc.query(dns::Endpoint{"127.0.0.1", 1}, q, 0ms));
}

TEST(Transport, UnansweredQueryTimesOut) {
  class Silent final : public dns::WireHandler {
   public:
    std::optional<std::vector<std::uint8_t>> handle_wire(std::span<const std::uint8_t>, bool) override {
      return std::nullopt;
    }
  } silent;
  dns::DnsSocketServer server(silent);
  dns::UdpDnsTransport udp;
  EXPECT_FALSE(udp.query(server.endpoint(), dns::make_query(1, "x.com", dns::type::A, true), 100ms));
}

TEST(Endpoint, Parse) {
  const auto ep = dns::Endpoint::parse("127.0.0.1:5353");
  EXPECT_EQ(ep.host, "127.0.0.1");
  EXPECT_EQ(ep.port, 5353);
  EXPECT_EQ(dns::Endpoint::parse("192.0.2.1").port, 53);
}

class MockServers : public testing::Test {
 protected:
  MockServers() : sc_(testing_support::hand_scenario()), world_(sc_), clock_(kT0 + 1h) {}
  std::optional<dns::Message> ask(dns::WireHandler& h, const std::string& name, std::uint16_t qtype) {
    const auto q = dns::make_query(42, name, qtype, false);
    const auto out = h.handle_wire(dns::encode(q), false);
    if (!out) return std::nullopt;
    return dns::decode(*out);
  }

  sim::Scenario sc_;
  sim::World world_;
  VirtualClock clock_;
};

TEST_F(MockServers, AuthoritativeReferralNxdomainRefused) {
  sim::MockAuthoritative auth(world_, clock_, "com");
  const auto live = ask(auth, "www.live.com", dns::type::NS);
  EXPECT_EQ(live->header.rcode, dns::Rcode::NoError);
  ASSERT_EQ(live->authority.size(), 2u);
  EXPECT_EQ(live->authority[0].text, "ns1.host.net");
  EXPECT_EQ(live->authority[0].name, "live.com");
  EXPECT_EQ(ask(auth, "parked.com", dns::type::NS)->header.rcode, dns::Rcode::NxDomain);
  EXPECT_EQ(ask(auth, "nobody.com", dns::type::NS)->header.rcode, dns::Rcode::NxDomain);
  EXPECT_EQ(ask(auth, "live.net", dns::type::NS)->header.rcode, dns::Rcode::Refused);
  EXPECT_EQ(auth.refused(), 1u);

  EXPECT_EQ(ask(auth, "brief.com", dns::type::NS)->header.rcode, dns::Rcode::NoError);
  clock_.set(kT0 + 3h);
  EXPECT_EQ(ask(auth, "brief.com", dns::type::NS)->header.rcode, dns::Rcode::NxDomain);
  EXPECT_EQ(auth.hits().count("brief.com", dns::type::NS), 2u);
  EXPECT_FALSE(auth.handle_wire(bytes({1, 2, 3}), false));
}

TEST_F(MockServers, StubResolverThroughRecursive) {
  sim::MockRecursive rec(world_, clock_, 3600);
  dns::InProcessDnsTransport transport;
  const dns::Endpoint ep{"10.0.0.53", 53};
  transport.attach(ep, rec);
  dns::QueryIdSource ids(1);
  dns::StubResolver stub(transport, ep, 1000ms, ids);

  const auto a = stub.resolve("live.com", dns::type::A);
  EXPECT_EQ(a.rcode, dns::ProbeRcode::NoError);
  ASSERT_EQ(a.answers.size(), 1u);
  EXPECT_EQ(a.answers[0].rfind("192.0.2.", 0), 0u);
  EXPECT_EQ(a.ttl, 3600u);
  EXPECT_EQ(stub.resolve("live.com", dns::type::AAAA).answers[0].rfind("2001:db8::", 0), 0u);

  const auto nx = stub.resolve("parked.com", dns::type::A);
  EXPECT_EQ(nx.rcode, dns::ProbeRcode::NxDomain);
  EXPECT_EQ(nx.ttl, 900u);

  dns::StubResolver nowhere(transport, dns::Endpoint{"10.0.0.54", 53}, 1000ms, ids);
  EXPECT_EQ(nowhere.resolve("live.com", dns::type::A).rcode, dns::ProbeRcode::Timeout);
}

class FixedResolver final : public dns::RecursiveResolver {
 public:
  dns::Resolution resolve(const std::string&, std::uint16_t) override {
    ++calls;
    return next;
  }
  dns::Resolution next;
  int calls = 0;
};

TEST(Caching, CapsTtlAtSixtySeconds) {
  VirtualClock clock(kT0);
  FixedResolver inner;
  inner.next.rcode = dns::ProbeRcode::NoError;
  inner.next.ttl = 3600;
  dns::CachingResolver cache(inner, clock);
  cache.resolve("a.com", dns::type::A);
  clock.advance(59s);
  EXPECT_TRUE(cache.resolve("a.com", dns::type::A).from_cache);
  clock.advance(1s);
  EXPECT_FALSE(cache.resolve("a.com", dns::type::A).from_cache);
  EXPECT_EQ(inner.calls, 2);
  EXPECT_EQ(cache.max_served_age(), 59s);
  EXPECT_EQ(cache.hits(), 1u);
  EXPECT_EQ(cache.misses(), 2u);
}

TEST(Caching, ShortTtlAndTimeouts) {
  VirtualClock clock(kT0);
  FixedResolver inner;
  inner.next.rcode = dns::ProbeRcode::NxDomain;
  inner.next.ttl = 10;
  dns::CachingResolver cache(inner, clock);
  cache.resolve("b.com", dns::type::A);
  clock.advance(10s);
  EXPECT_FALSE(cache.resolve("b.com", dns::type::A).from_cache);
  inner.next.rcode = dns::ProbeRcode::Timeout;
  inner.next.ttl = 300;
  cache.resolve("c.com", dns::type::A);
  EXPECT_FALSE(cache.resolve("c.com", dns::type::A).from_cache);
  EXPECT_EQ(inner.calls, 4);
}

}  // namespace
}  // namespace darkdns
