#include <gtest/gtest.h>

#include <thread>

#include "darkdns/ct_ingest.hpp"

namespace darkdns {
namespace {

SuffixRuleSet rules() { return SuffixRuleSet::from_rules({"com", "net", "co.uk"}); }

std::string message(const std::string& type, const std::string& names, double seen = 1699178400.5) {
  return R"({"message_type":"certificate_update","data":{"update_type":")" + type +
         R"(","leaf_cert":{"all_domains":)" + names + R"(},"seen":)" + std::to_string(seen) +
         R"(,"source":{"url":"ct.example/log"}}})";
}

TEST(CertEvents, ParsesPrecertAndLeaf) {
  const auto ev = parse_cert_event(message("PrecertLogEntry", R"(["a.example.com","*.example.com"])"));
  EXPECT_EQ(ev.entry_kind, EntryKind::Precert);
  EXPECT_EQ(ev.names.size(), 2u);
  EXPECT_EQ(to_epoch(ev.seen_at), 1699178400);
  EXPECT_EQ(ev.log_id, "ct.example/log");
  EXPECT_EQ(parse_cert_event(message("X509LogEntry", R"(["x.com"])")).entry_kind, EntryKind::LeafCert);
}

TEST(CertEvents, MalformedMessagesRejected) {
  for (const std::string bad :
       {std::string("not json"), std::string(R"({"message_type":"heartbeat"})"), message("Other", R"(["a.com"])"),
        message("PrecertLogEntry", "[]"), message("PrecertLogEntry", "[1]"),
        std::string(R"({"message_type":"certificate_update","data":{"update_type":"PrecertLogEntry"}})")}) {
    try {
      parse_cert_event(bad);
      ADD_FAILURE() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedEvent);
    }
  }
}

TEST(CertEvents, JsonLineRoundTrip) {
  CertEvent ev{from_epoch(1700000000), EntryKind::Precert, {"a.com", "b.net"}, "log"};
  const auto back = parse_cert_event(cert_event_to_json_line(ev));
  EXPECT_EQ(back.seen_at, ev.seen_at);
  EXPECT_EQ(back.names, ev.names);
  EXPECT_EQ(back.log_id, "log");
}

TEST(Candidates, ExtractDistinctRegistrables) {
  IngestCounters c;
  CertEvent ev{from_epoch(0), EntryKind::Precert,
               {"www.shop.co.uk", "shop.co.uk", "*.Shop.CO.UK.", "bad name.com", "co.uk", "x.unknown", "mail.a.com"},
               "log"};
  const auto out = extract_candidates(ev, rules(), &c);
  std::vector<std::string> names;
  for (const auto& d : out) names.push_back(d.full());
  EXPECT_EQ(names, (std::vector<std::string>{"a.com", "shop.co.uk"}));
  EXPECT_EQ(c.names_dropped.load(), 3u);
}

TEST(Candidates, LeafCertsDroppedByDefault) {
  IngestCounters c;
  CertEvent ev{from_epoch(0), EntryKind::LeafCert, {"a.com"}, "log"};
  EXPECT_TRUE(extract_candidates(ev, rules(), &c).empty());
  EXPECT_EQ(c.leaf_certs_dropped.load(), 1u);
  EXPECT_EQ(extract_candidates(ev, rules(), &c, true).size(), 1u);
}

TEST(Filter, EmitsOnlyUnknownNewDomainsOnce) {
  ZoneStore z;
  z.add_snapshot("com", parse_date("2023-11-01"), {"old"});
  SeenSet seen(std::chrono::hours(24 * 30));
  IngestCounters c;
  const std::set<RegistrableDomain> batch = {RegistrableDomain::from_parts("old", "com"),
                                             RegistrableDomain::from_parts("new", "com"),
                                             RegistrableDomain::from_parts("x", "net")};
  const auto t = from_epoch(1698800000);
  const auto r1 = filter_new(batch, z, seen, t, "log", &c);
  ASSERT_EQ(r1.emitted.size(), 1u);
  EXPECT_EQ(r1.emitted[0].domain.full(), "new.com");
  EXPECT_EQ(r1.emitted[0].first_seen_ct, t);
  ASSERT_EQ(r1.quarantined.size(), 1u);
  EXPECT_EQ(r1.quarantined[0].full(), "x.net");
  const auto r2 = filter_new(batch, z, seen, t + std::chrono::seconds(5), "log", &c);
  EXPECT_TRUE(r2.emitted.empty());
  EXPECT_EQ(c.duplicates.load(), 1u);
  EXPECT_EQ(c.known_domains.load(), 2u);
  EXPECT_EQ(seen.first_seen("new.com"), t);
}

TEST(SeenSetTest, ExpiryAndRestore) {
  SeenSet s(std::chrono::hours(1));
  const auto t = from_epoch(1000000);
  EXPECT_TRUE(s.observe("a.com", t));
  EXPECT_FALSE(s.observe("a.com", t - std::chrono::seconds(10)));
  EXPECT_EQ(s.first_seen("a.com"), t - std::chrono::seconds(10));
  s.observe("b.com", t + std::chrono::minutes(50));
  SeenSet copy(std::chrono::hours(1));
  copy.restore(s.to_json());
  EXPECT_EQ(copy.size(), 2u);
  EXPECT_EQ(copy.expire(t + std::chrono::minutes(61)), 1u);
  EXPECT_FALSE(copy.contains("a.com"));
  s.forget("b.com");
  EXPECT_TRUE(s.observe("b.com", t));
}

TEST(SeenSetTest, ConcurrentObserversAgreeOnOneWinner) {
  SeenSet s(std::chrono::hours(1));
  std::atomic<int> winners{0};
  std::vector<std::thread> threads;
  for (int i = 0; i < 8; ++i) {
    threads.emplace_back([&] {
      for (int k = 0; k < 500; ++k) winners += s.observe("d" + std::to_string(k) + ".com", from_epoch(k)) ? 1 : 0;
    });
  }
  for (auto& t : threads) t.join();
  EXPECT_EQ(winners.load(), 500);
}

TEST(Partitioning, StableAndInRange) {
  const auto d = RegistrableDomain::from_parts("example", "com");
  EXPECT_EQ(partition_for(d, 8), partition_for(d, 8));
  EXPECT_LT(partition_for(d, 8), 8u);
  EXPECT_EQ(partition_for(d, 0), 0u);
}

}  // namespace
}  // namespace darkdns
