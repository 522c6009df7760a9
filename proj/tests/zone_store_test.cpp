#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "darkdns/zone_store.hpp"

namespace darkdns {
namespace {

const Date kDay1 = parse_date("2023-11-01");
const Date kDay2 = parse_date("2023-11-02");

constexpr const char* kZone = R"($ORIGIN com.
$TTL 86400
@        IN SOA a.gtld-servers.net. nstld.verisign-grs.com. 1 2 3 4 5
@        IN NS  a.gtld-servers.net.
example  IN NS  ns1.example.net.
         IN NS  ns2.example.net.   ; continuation of example
EXAMPLE2 172800 IN NS ns1.host.net.
absolute.com. IN NS ns1.host.net.
ns1.example IN A 192.0.2.1
www.deep 3600 NS ns1.host.net.
glue     IN A   192.0.2.7
)";

TEST(ZoneParse, CollectsDelegatedSecondLevelLabels) {
  std::istringstream in(kZone);
  const auto r = parse_zone(in, "com");
  EXPECT_EQ(r.labels, (std::vector<std::string>{"absolute", "example", "example2"}));
  EXPECT_EQ(r.records, 9u);
  EXPECT_EQ(r.ignored_records, 5u);
}

TEST(ZoneParse, ErrorsCarryLineNumbers) {
  std::istringstream in("$ORIGIN com.\nfoo IN BOGUS x\n");
  try {
    parse_zone(in, "com");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  std::istringstream dir("$INCLUDE other\n");
  EXPECT_THROW(parse_zone(dir, "com"), Error);
}

TEST(ZoneStore, LatestFollowsMaxDateNotLoadOrder) {
  ZoneStore z;
  z.add_snapshot("com", kDay2, {"new", "old"});
  z.add_snapshot("com", kDay1, {"old", "gone"});
  EXPECT_EQ(z.latest_date("com"), kDay2);
  EXPECT_TRUE(z.contains("com", "new"));
  EXPECT_FALSE(z.contains("com", "gone"));
  EXPECT_EQ(z.latest_contains("net", "x"), std::nullopt);
  EXPECT_THROW(z.contains("net", "x"), Error);
  EXPECT_TRUE(z.existed_before("com", "gone", kDay2));
  EXPECT_FALSE(z.existed_before("com", "new", kDay2));
  EXPECT_EQ(z.appearances("com", "old", kDay1, kDay2), (std::vector<Date>{kDay1, kDay2}));
}

TEST(ZoneStore, DuplicateSnapshotRejected) {
  ZoneStore z;
  z.add_snapshot("com", kDay1, {"a"});
  try {
    z.add_snapshot("com", kDay1, {"b"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicateSnapshot);
  }
  std::istringstream in(kZone);
  EXPECT_THROW(z.load_snapshot(in, "com", kDay1), Error);
}

TEST(ZoneStore, EmptySnapshotIsLoadedWithWarning) {
  ZoneStore z;
  z.add_snapshot("xyz", kDay1, {});
  EXPECT_EQ(z.empty_snapshot_warnings(), 1u);
  EXPECT_EQ(z.latest_contains("xyz", "a"), false);
}

TEST(ZoneStore, DiffMatchesSetDifferenceOracle) {
  std::mt19937 rng(4);
  std::vector<std::string> a, b;
  for (int i = 0; i < 2000; ++i) {
    const auto label = "d" + std::to_string(rng() % 3000);
    if (rng() % 2) a.push_back(label);
    if (rng() % 2) b.push_back(label);
  }
  ZoneStore z;
  z.add_snapshot("com", kDay1, a);
  z.add_snapshot("com", kDay2, b);
  const auto diff = z.diff_snapshots("com", kDay1, kDay2);
  const std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::size_t added = 0, removed = 0;
  for (const auto& l : sb) added += sa.count(l) ? 0 : 1;
  for (const auto& l : sa) removed += sb.count(l) ? 0 : 1;
  EXPECT_EQ(diff.added.size(), added);
  EXPECT_EQ(diff.removed.size(), removed);
  for (const auto& l : diff.added) EXPECT_TRUE(sb.count(l) && !sa.count(l));
  try {
    z.diff_snapshots("com", kDay1, parse_date("2023-11-03"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingSnapshot);
  }
}

TEST(ZoneStore, ApproximateModeHasNoFalseNegatives) {
  ZoneStore z(MembershipMode::Approximate);
  std::vector<std::string> labels;
  for (int i = 0; i < 20000; ++i) labels.push_back("member" + std::to_string(i));
  z.add_snapshot("com", kDay1, labels);
  for (const auto& l : labels) ASSERT_TRUE(z.contains("com", l));
  int false_positives = 0;
  for (int i = 0; i < 20000; ++i) false_positives += z.contains("com", "absent" + std::to_string(i)) ? 1 : 0;
  EXPECT_LT(false_positives, 20);
  z.add_snapshot("com", kDay2, labels);
  try {
    z.diff_snapshots("com", kDay1, kDay2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ApproximateMembership);
  }
}

TEST(Coverage, HalfUpRoundingToOneDecimal) {
  EXPECT_DOUBLE_EQ(coverage_percent(1, 3), 33.3);
  EXPECT_DOUBLE_EQ(coverage_percent(2, 3), 66.7);
  EXPECT_DOUBLE_EQ(coverage_percent(1, 8), 12.5);
  EXPECT_DOUBLE_EQ(coverage_percent(1, 16), 6.3);  // 6.25 rounds up
  EXPECT_DOUBLE_EQ(coverage_percent(0, 0), 0.0);
}

TEST(Coverage, TotalsRecomputedFromSums) {
  const auto rep = coverage_from_counts({{"a", 1, 2, 0}, {"b", 1, 8, 0}});
  EXPECT_DOUBLE_EQ(rep.rows[0].coverage_pct, 50.0);
  EXPECT_EQ(rep.total.detected_nrd, 2u);
  EXPECT_EQ(rep.total.zone_nrd, 10u);
  EXPECT_DOUBLE_EQ(rep.total.coverage_pct, 20.0);
  EXPECT_EQ(rep.to_csv(), "tld,detected,zone_nrd,coverage_pct\na,1,2,50.0\nb,1,8,12.5\ntotal,2,10,20.0\n");
}

TEST(Coverage, FromCandidatesCountsOnlyZoneAdditions) {
  const Timestamp t = start_of(kDay1);
  const std::vector<CandidateNRD> detected = {
      {RegistrableDomain::from_parts("a", "com"), t, "l"},
      {RegistrableDomain::from_parts("a", "com"), t, "l"},
      {RegistrableDomain::from_parts("z", "com"), t, "l"},
      {RegistrableDomain::from_parts("b", "net"), t, "l"}};
  const auto rep = coverage(detected, {{"com", {"a", "c"}}, {"net", {"b"}}});
  EXPECT_EQ(rep.rows[0].detected_nrd, 1u);
  EXPECT_DOUBLE_EQ(rep.rows[0].coverage_pct, 50.0);
  EXPECT_DOUBLE_EQ(rep.rows[1].coverage_pct, 100.0);
}

TEST(Coverage, FixtureReproducesPublishedTable) {
  std::ifstream in(std::string(DARKDNS_SOURCE_DIR) + "/tests/fixtures/coverage_counts.csv");
  const auto rep = coverage_from_counts(parse_coverage_counts(in));
  const std::map<std::string, double> published = {{"com", 44.2}, {"xyz", 47.7}, {"shop", 36.6}, {"online", 40.6},
                                                   {"bond", 82.7}, {"top", 45.2}, {"net", 36.7},  {"org", 38.1},
                                                   {"site", 34.4}, {"store", 40.4}, {"Others", 34.6}};
  ASSERT_EQ(rep.rows.size(), published.size());
  for (const auto& r : rep.rows) EXPECT_NEAR(r.coverage_pct, published.at(r.tld), 0.05) << r.tld;
  EXPECT_NEAR(rep.total.coverage_pct, 42.0, 0.05);
}

TEST(Coverage, RejectsNonNumericCounts) {
  std::istringstream in("tld,detected,zone\ncom,12,x\n");
  EXPECT_THROW(parse_coverage_counts(in), Error);
}

}  // namespace
}  // namespace darkdns
