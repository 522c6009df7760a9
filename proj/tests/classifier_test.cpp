#include <gtest/gtest.h>

#include <random>

#include "darkdns/classifier.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using S = LifecycleState;
using testing_support::kT0;

const AnalysisWindow kWindow(parse_date("2023-11-01"), parse_date("2023-11-07"));

DomainLifecycle fresh(const std::string& label = "x") {
  return DomainLifecycle::from_candidate(CandidateNRD{RegistrableDomain::from_parts(label, "com"), kT0, "log"});
}

RdapRecord rdap_for(const DomainLifecycle& lc, Duration before_seen, std::string registrar = "Reg") {
  RdapRecord r;
  r.domain = lc.domain;
  r.registration_ts = lc.first_seen_ct - before_seen;
  r.registrar_name = std::move(registrar);
  return r;
}

Timestamp noon(const char* date) { return start_of(parse_date(date)) + 12h; }

TEST(ApplyEvent, HappyPathToEarlyRemoved) {
  auto lc = fresh();
  lc = apply_event(lc, RdapOk{rdap_for(lc, 30min), kT0 + 1min}, kWindow);
  EXPECT_EQ(lc.state, S::ConfirmedNrd);
  EXPECT_EQ(lc.validation->lag, 30min);
  lc = apply_event(lc, ZoneAppeared{"com", parse_date("2023-11-03"), noon("2023-11-03")}, kWindow);
  EXPECT_EQ(lc.state, S::InZone);
  lc = apply_event(lc, ZoneRemoved{"com", parse_date("2023-11-05"), noon("2023-11-05")}, kWindow);
  EXPECT_EQ(lc.state, S::EarlyRemoved);
  EXPECT_EQ(lc.final_class_at, noon("2023-11-05"));
  EXPECT_EQ(lc.transitions.size(), 3u);
  EXPECT_THROW(apply_event(lc, ZoneAppeared{"com", parse_date("2023-11-06"), noon("2023-11-06")}, kWindow), Error);
}

TEST(ApplyEvent, NeverInZoneBecomesTransient) {
  auto lc = fresh();
  lc = apply_event(lc, RdapOk{rdap_for(lc, 2h), kT0}, kWindow);
  lc = apply_event(lc, WindowClosed{noon("2023-11-11")}, kWindow);
  EXPECT_EQ(lc.state, S::Transient);
  EXPECT_EQ(lc.final_class_at, noon("2023-11-11"));
}

TEST(ApplyEvent, MisclassifiedAndFailed) {
  auto lc = fresh();
  const auto mis = apply_event(lc, RdapOk{rdap_for(lc, 24h + 1s), kT0}, kWindow);
  EXPECT_EQ(mis.state, S::Misclassified);
  EXPECT_TRUE(is_terminal(mis.state));
  EXPECT_THROW(apply_event(mis, RdapOk{rdap_for(lc, 0s), kT0}, kWindow), Error);

  RdapFailure f;
  f.domain = lc.domain;
  f.cause = RdapFailureCause::TooLate;
  const auto failed = apply_event(lc, RdapFail{f, kT0}, kWindow);
  EXPECT_EQ(failed.state, S::RdapFailed);
  EXPECT_EQ(apply_event(failed, WindowClosed{kT0 + 100h}, kWindow).state, S::RdapFailed);
}

TEST(ApplyEvent, RemovalWithoutAppearanceIsIllegal) {
  auto lc = fresh();
  lc = apply_event(lc, RdapOk{rdap_for(lc, 0s), kT0}, kWindow);
  EXPECT_THROW(apply_event(lc, ZoneRemoved{"com", parse_date("2023-11-03"), kT0}, kWindow), Error);
}

TEST(ApplyEvent, AppearancesOutsideSlackDoNotCount) {
  auto lc = fresh();
  lc = apply_event(lc, ZoneAppeared{"com", parse_date("2023-10-29"), kT0}, kWindow);
  lc = apply_event(lc, ZoneAppeared{"com", parse_date("2023-11-11"), kT0}, kWindow);
  lc = apply_event(lc, RdapOk{rdap_for(lc, 0s), kT0}, kWindow);
  EXPECT_EQ(lc.state, S::ConfirmedNrd);
  lc = apply_event(lc, ZoneAppeared{"com", parse_date("2023-10-30"), kT0}, kWindow);
  EXPECT_EQ(lc.state, S::InZone);
}

S expected_state(bool confirmed, const std::vector<Date>& days, std::optional<Date> removal) {
  if (!confirmed) return S::Misclassified;
  const bool in_range = std::any_of(days.begin(), days.end(), [](Date d) { return kWindow.in_appearance_range(d, kT0); });
  if (!in_range) return S::Transient;
  return removal && *removal <= kWindow.end ? S::EarlyRemoved : S::InZone;
}

TEST(ApplyEvent, FinalStateIsIndependentOfEventOrder) {
  std::mt19937 rng(20231101);
  const Date base = parse_date("2023-10-24");
  for (int trial = 0; trial < 3000; ++trial) {
    auto lc = fresh();
    const bool confirmed = rng() % 5 != 0;
    const auto rec = rdap_for(lc, confirmed ? Duration{rng() % 86400} : 30h);
    std::vector<Date> days;
    std::optional<Date> removal;
    if (rng() % 4 != 0) {
      const int first = static_cast<int>(rng() % 22);
      const int len = 1 + static_cast<int>(rng() % 8);
      for (int i = 0; i < len; ++i) days.push_back(base + std::chrono::days(first + i));
      if (rng() % 2) removal = days.back() + std::chrono::days(1);
    }
    std::vector<LifecycleEvent> events{RdapOk{rec, kT0}};
    for (const auto d : days) events.push_back(ZoneAppeared{"com", d, kT0});
    std::shuffle(events.begin(), events.end(), rng);
    if (removal) {
      const auto first_app = std::find_if(events.begin(), events.end(),
                                          [](const LifecycleEvent& e) { return e.index() == 2; });
      const auto at = first_app + 1 + static_cast<std::ptrdiff_t>(rng() % (events.end() - first_app));
      events.insert(at, ZoneRemoved{"com", *removal, kT0});
    }
    events.push_back(WindowClosed{kT0 + 300h});
    for (const auto& e : events) {
      if (lc.state == S::Transient || lc.state == S::EarlyRemoved) break;
      if (lc.state == S::Misclassified && e.index() == 0) continue;
      lc = apply_event(lc, e, kWindow);
    }
    ASSERT_EQ(lc.state, expected_state(confirmed, days, removal)) << "trial " << trial;
  }
}

TEST(Transients, FinalizationDropsOldRegistrationsAndFailures) {
  std::vector<DomainLifecycle> all;
  for (const auto& [label, before] : std::vector<std::pair<std::string, Duration>>{{"a", 1h}, {"b", 1h}, {"c", 1h}}) {
    auto lc = fresh(label);
    lc.state = S::Transient;
    lc.rdap = rdap_for(lc, before);
    all.push_back(lc);
  }
  all[1].rdap->registration_ts = start_of(kWindow.start) - 24h - 1s;
  all[2].rdap_failure = RdapFailure{};
  auto edge = fresh("d");
  edge.state = S::Transient;
  edge.rdap = rdap_for(edge, 0s);
  edge.rdap->registration_ts = start_of(kWindow.start) - 24h;
  all.push_back(edge);
  all.push_back(fresh("e"));
  EXPECT_EQ(raw_transients(all).size(), 4u);
  const auto final_set = finalize_transients(all, kWindow);
  ASSERT_EQ(final_set.size(), 2u);
  EXPECT_EQ(final_set[0].full(), "a.com");
  EXPECT_EQ(final_set[1].full(), "d.com");
}

TEST(Cdf, MatchesCountingOracle) {
  std::mt19937 rng(5);
  std::vector<Duration> lags;
  for (int i = 0; i < 500; ++i) lags.push_back(Duration{rng() % 20000});
  const auto cdf = cdf_of(lags, 5min);
  EXPECT_EQ(cdf.front().x, 0s);
  EXPECT_DOUBLE_EQ(cdf.back().y, 1.0);
  for (const auto& p : cdf) {
    const auto n = std::count_if(lags.begin(), lags.end(), [&](Duration l) { return l <= p.x; });
    EXPECT_DOUBLE_EQ(p.y, static_cast<double>(n) / 500.0);
  }
  EXPECT_DOUBLE_EQ(cdf_at(cdf, 7min), cdf_at(cdf, 5min));
  EXPECT_EQ(cdf_at(cdf, -1s), 0.0);
  EXPECT_TRUE(cdf_of({}).empty());
}

TEST(Cdf, ConfirmedLagsClampNegatives) {
  auto a = fresh("a");
  a = apply_event(a, RdapOk{rdap_for(a, -10min), kT0}, kWindow);
  auto b = fresh("b");
  b = apply_event(b, RdapOk{rdap_for(b, 45min), kT0}, kWindow);
  auto c = fresh("c");
  c = apply_event(c, RdapOk{rdap_for(c, 48h), kT0}, kWindow);
  const auto lags = confirmed_lags({a, b, c});
  EXPECT_EQ(lags, (std::vector<Duration>{0s, 45min}));
  const auto csv = cdf_to_csv(detection_lag_cdf({a, b, c}, 15min));
  EXPECT_EQ(csv, "x,y\n0,0.5\n15,0.5\n30,0.5\n45,1.0\n");
}

TEST(Lifetime, ClampsAndReportsMissingData) {
  auto a = fresh("a");
  a.rdap = rdap_for(a, 1h);
  a.last_valid_ns = a.rdap->registration_ts + 90min;
  auto b = fresh("b");
  b.rdap = rdap_for(b, 1h);
  b.last_valid_ns = b.rdap->registration_ts - 10min;
  auto c = fresh("c");
  c.rdap = rdap_for(c, 1h);
  EXPECT_EQ(lifetime(a), 90min);
  const auto rep = lifetimes_of({a, b, c});
  EXPECT_EQ(rep.lifetimes.at("b.com"), 0s);
  EXPECT_EQ(rep.negative_clamped, 1u);
  EXPECT_EQ(rep.missing_probe_data, std::vector<std::string>{"c.com"});
  EXPECT_THROW(lifetime(fresh("d")), Error);
}

TEST(Stats, MedianAndHistogram) {
  EXPECT_EQ(median({3h, 1h, 2h}), 2h);
  EXPECT_EQ(median({4h, 1h, 2h, 3h}), 2h);
  EXPECT_THROW(median({}), Error);
  const auto h = histogram({0s, 59min, 1h, 3h + 5min});
  EXPECT_EQ(h, (std::vector<std::pair<std::int64_t, std::uint64_t>>{{0, 2}, {1, 1}, {2, 0}, {3, 1}}));
  EXPECT_EQ(histogram_to_csv(h), "x,y\n0,2\n1,1\n2,0\n3,1\n");
}

TEST(Registrars, RankedWithOthersRow) {
  std::vector<DomainLifecycle> ts;
  const std::vector<std::pair<std::string, int>> spec{{"Alpha", 5}, {"Beta", 3}, {"Gamma", 3}, {"Delta", 1}, {"", 1}};
  int i = 0;
  for (const auto& [name, n] : spec) {
    for (int k = 0; k < n; ++k) {
      auto lc = fresh("d" + std::to_string(i++));
      lc.rdap = rdap_for(lc, 0s, name);
      if (name.empty()) lc.rdap->registrar_iana_id = 146;
      ts.push_back(lc);
    }
  }
  const auto all = registrar_distribution(ts);
  ASSERT_EQ(all.size(), 5u);
  EXPECT_EQ(all[1].registrar, "Beta");
  EXPECT_EQ(all[2].registrar, "Gamma");
  EXPECT_EQ(all[3].registrar, "Delta");
  EXPECT_EQ(all[4].registrar, "IANA 146");
  const auto top = registrar_distribution(ts, 2);
  ASSERT_EQ(top.size(), 3u);
  EXPECT_EQ(top[2].registrar, "Others");
  EXPECT_EQ(top[2].count, 5u);
  EXPECT_NEAR(top[0].pct, 100.0 * 5 / 13, 1e-9);
  EXPECT_EQ(registrar_table_csv(top), "registrar,count,pct\nAlpha,5,38.46\nBeta,3,23.08\nOthers,5,38.46\n");
  EXPECT_DOUBLE_EQ(round_pct(2.345, 2), 2.35);
  EXPECT_DOUBLE_EQ(round_pct(32.5, 0), 33.0);
  EXPECT_THROW(registrar_distribution({fresh()}), Error);
}

TEST(LifecycleJson, RoundTrips) {
  auto lc = fresh();
  lc = apply_event(lc, RdapOk{rdap_for(lc, 30min), kT0 + 1min}, kWindow);
  lc = apply_event(lc, ZoneAppeared{"com", parse_date("2023-11-03"), noon("2023-11-03")}, kWindow);
  lc.last_valid_ns = kT0 + 2h;
  lc.generation = 2;
  const auto back = lifecycle_from_json(to_json(lc));
  EXPECT_EQ(to_json(back), to_json(lc));
  EXPECT_EQ(back.state, S::InZone);
  EXPECT_EQ(back.validation->lag, 30min);
}

}  // namespace
}  // namespace darkdns
