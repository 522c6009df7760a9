#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <sstream>

#include "darkdns/blocklist.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using testing_support::kT0;

const SuffixRuleSet& rules() {
  static const auto r = SuffixRuleSet::load(std::string(DARKDNS_SOURCE_DIR) + "/data/public_suffix_list.dat");
  return r;
}

BlocklistSnapshot snap(const std::string& list, const char* date, std::set<std::string> domains) {
  BlocklistSnapshot s;
  s.list_name = list;
  s.snapshot_date = parse_date(date);
  s.domains = std::move(domains);
  return s;
}

TEST(LoadBlocklist, ReducesEntriesToRegistrableDomains) {
  std::stringstream in(
      "# header\n"
      "evil.com\n"
      "0.0.0.0 login.phish.co.uk   # hosts style\n"
      "\n"
      "co.uk\n"
      "bad name\n"
      "EVIL.com.\n");
  const auto s = load_blocklist(in, "urlhaus", parse_date("2023-11-03"), rules());
  EXPECT_EQ(s.domains, (std::set<std::string>{"evil.com", "phish.co.uk"}));
  EXPECT_EQ(s.hostname_attributed, 1u);
  EXPECT_EQ(s.skipped_lines, 2u);
  EXPECT_EQ(s.list_name, "urlhaus");
}

TEST(BlocklistStore, EarliestFlagMatchesFullScan) {
  std::mt19937 rng(11);
  std::vector<BlocklistSnapshot> raw;
  BlocklistStore store;
  const Date base = parse_date("2023-11-01");
  for (const auto* list : {"a", "b", "c"}) {
    std::vector<int> days{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    std::shuffle(days.begin(), days.end(), rng);
    for (const int d : days) {
      BlocklistSnapshot s;
      s.list_name = list;
      s.snapshot_date = base + std::chrono::days(d);
      for (int i = 0; i < 40; ++i) s.domains.insert("d" + std::to_string(rng() % 60) + ".com");
      raw.push_back(s);
      store.add(s);
    }
  }
  EXPECT_EQ(store.snapshot_count(), 30u);
  for (int i = 0; i < 62; ++i) {
    const auto name = "d" + std::to_string(i) + ".com";
    const auto expect = first_flag(name, raw);
    const auto got = store.first_flag(name);
    ASSERT_EQ(got.has_value(), expect.has_value()) << name;
    if (got) {
      EXPECT_EQ(got->date, expect->date) << name;
      EXPECT_EQ(got->list_name, expect->list_name) << name;
    }
  }
  EXPECT_THROW(store.add(raw.front()), Error);
}

TEST(BlocklistStore, PerListAndTieBreakByName) {
  BlocklistStore store;
  store.add(snap("zeta", "2023-11-02", {"x.com"}));
  store.add(snap("alpha", "2023-11-02", {"x.com"}));
  store.add(snap("alpha", "2023-11-01", {"y.com"}));
  EXPECT_EQ(store.first_flag("x.com")->list_name, "alpha");
  EXPECT_EQ(store.per_list("x.com").size(), 2u);
  EXPECT_EQ(store.first_flag("z.com"), std::nullopt);
  EXPECT_EQ(store.flagged_count(), 2u);
}

TEST(BlocklistStore, LoadsDirectoryLayout) {
  testing_support::ScratchDir dir;
  std::filesystem::create_directories(dir.path() / "openphish");
  std::ofstream(dir.path() / "openphish" / "2023-11-04.txt") << "http-host.evil.com\n";
  std::ofstream(dir.path() / "openphish" / "2023-11-02.txt") << "evil.com\n";
  std::ofstream(dir.path() / "openphish" / "notes.md") << "ignored\n";
  BlocklistStore store;
  store.load_directory(dir.path(), rules());
  EXPECT_EQ(store.snapshot_count(), 2u);
  EXPECT_EQ(store.first_flag("evil.com")->date, parse_date("2023-11-02"));
  EXPECT_EQ(store.hostname_attributed(), 1u);
  EXPECT_THROW(store.load_directory(dir.path() / "missing", rules()), Error);
}

TEST(FlagTiming, DateGranularCategories) {
  const Date reg = parse_date("2023-11-02");
  const Date del = parse_date("2023-11-04");
  using C = FlagCategory;
  EXPECT_EQ(classify_flag_date(reg, del, parse_date("2023-11-01")), C::BeforeRegistration);
  EXPECT_EQ(classify_flag_date(reg, del, reg), C::WhileActive);
  EXPECT_EQ(classify_flag_date(reg, del, del), C::WhileActive);
  EXPECT_EQ(classify_flag_date(reg, del, parse_date("2023-11-05")), C::PostDeletion);
  EXPECT_EQ(classify_flag_date(reg, std::nullopt, parse_date("2024-01-01")), C::WhileActive);
}

DomainLifecycle lifecycle(const std::string& label, Timestamp reg) {
  auto lc = DomainLifecycle::from_candidate(CandidateNRD{RegistrableDomain::from_parts(label, "com"), reg, "log"});
  RdapRecord r;
  r.domain = lc.domain;
  r.registration_ts = reg;
  lc.rdap = r;
  return lc;
}

TEST(FlagTiming, DeletionSourcesAndStrictMode) {
  auto probed = lifecycle("p", kT0);
  probed.deletion_inferred_at = kT0 + 30h;
  probed.zone_removed_on = parse_date("2023-11-10");
  const FlagHit late{"l", parse_date("2023-11-05")};
  EXPECT_EQ(classify_timing(probed, late).category, FlagCategory::PostDeletion);

  auto zoned = lifecycle("z", kT0);
  zoned.zone_removed_on = parse_date("2023-11-05");
  EXPECT_EQ(classify_timing(zoned, late).category, FlagCategory::WhileActive);
  EXPECT_FALSE(classify_timing(zoned, late).deletion_date_missing);

  const auto open = lifecycle("o", kT0);
  EXPECT_TRUE(classify_timing(open, late).deletion_date_missing);
  EXPECT_THROW(classify_timing(open, late, true), Error);
  EXPECT_NO_THROW(classify_timing(open, FlagHit{"l", parse_date("2023-11-02")}, true));
}

TEST(Correlate, SummaryAndCsv) {
  BlocklistStore store;
  store.add(snap("l", "2023-11-01", {"before.com"}));
  store.add(snap("l", "2023-11-03", {"active.com"}));
  store.add(snap("l", "2023-11-09", {"after.com", "unknown.com"}));
  auto after = lifecycle("after", kT0);
  after.deletion_inferred_at = kT0 + 5h;
  auto no_rdap = DomainLifecycle::from_candidate(CandidateNRD{RegistrableDomain::from_parts("unknown", "com"), kT0, "l"});
  const auto rep = correlate({lifecycle("before", kT0), lifecycle("active", kT0), after, no_rdap}, store);
  EXPECT_EQ(rep.summary.before_registration, 1u);
  EXPECT_EQ(rep.summary.while_active, 1u);
  EXPECT_EQ(rep.summary.post_deletion, 1u);
  EXPECT_EQ(rep.summary.deletion_date_missing, 1u);
  EXPECT_EQ(rep.to_csv(),
            "domain,list,first_flag_date,category\n"
            "active.com,l,2023-11-03,WHILE_ACTIVE\n"
            "after.com,l,2023-11-09,POST_DELETION\n"
            "before.com,l,2023-11-01,BEFORE_REGISTRATION\n");
}

}  // namespace
}  // namespace darkdns
