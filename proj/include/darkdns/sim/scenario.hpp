#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "darkdns/classifier.hpp"
#include "darkdns/error.hpp"
#include "darkdns/sim/random.hpp"
#include "darkdns/time.hpp"

namespace darkdns::sim {

enum class DomainKind { Normal, Transient, EarlyRemoved, Stale, DeadDv, Background };

constexpr std::string_view to_string(DomainKind k) {
  switch (k) {
    case DomainKind::Normal: return "normal";
    case DomainKind::Transient: return "transient";
    case DomainKind::EarlyRemoved: return "early_removed";
    case DomainKind::Stale: return "stale";
    case DomainKind::DeadDv: return "dead_dv";
    case DomainKind::Background: return "background";
  }
  return "?";
}

inline DomainKind domain_kind_from_string(std::string_view s) {
  for (auto k : {DomainKind::Normal, DomainKind::Transient, DomainKind::EarlyRemoved, DomainKind::Stale,
                 DomainKind::DeadDv, DomainKind::Background}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::ParseError, "unknown domain kind '" + std::string(s) + "'");
}

struct NsPeriod {
  Timestamp from;
  std::vector<std::string> ns;
};

struct ScriptedFlag {
  std::string list;
  Date date;
};

/// Everything the synthetic world knows about one registration.
struct DomainTimeline {
  std::string name;
  DomainKind kind = DomainKind::Normal;
  Timestamp registration_ts;
  std::optional<Timestamp> deletion_ts;
  /// Delegated in the TLD zone while registered.
  bool delegated = true;
  /// Certificate issued from cached validation for an already deleted name.
  bool cert_without_validation = false;
  std::vector<NsPeriod> ns_sets;
  /// RDAP returns the object only from registration + sync delay on.
  Duration rdap_sync_delay{0};
  /// RDAP stops returning the object once deleted.
  bool rdap_purge_on_delete = false;
  std::string registrar_name;
  std::int64_t registrar_iana_id = 0;
  std::vector<ScriptedFlag> blocklist_flags;

  bool registered_at(Timestamp t) const { return registration_ts <= t && (!deletion_ts || t < *deletion_ts); }
  bool delegated_at(Timestamp t) const { return delegated && registered_at(t); }
  bool in_snapshot(Date d) const { return delegated_at(start_of(d)); }
  bool rdap_available_at(Timestamp t) const {
    if (t < registration_ts + rdap_sync_delay) return false;
    return !(rdap_purge_on_delete && deletion_ts && t >= *deletion_ts);
  }
  const std::vector<std::string>* ns_at(Timestamp t) const {
    const std::vector<std::string>* cur = nullptr;
    for (const auto& p : ns_sets) {
      if (p.from <= t) cur = &p.ns;
    }
    return cur;
  }
  std::string tld() const { return name.substr(name.find('.') + 1); }
  std::string label() const { return name.substr(0, name.find('.')); }
};

struct ScriptedCert {
  Timestamp at;
  std::vector<std::string> names;
  bool precert = true;
  std::string log;
};

struct SnapshotPublication {
  std::string tld;
  Date date;
  Timestamp published_at;
};

struct RdapFailureMix {
  /// Share of NRDs whose RDAP record appears hours after registration.
  double sync_delay = 0.0;
  /// Share of transients whose certificate lands minutes before deletion and
  /// whose RDAP object is purged on deletion.
  double post_deletion = 0.0;
};

struct SnapshotLateness {
  /// Share of daily snapshots published late.
  double fraction = 0.0;
  int max_days = 2;
};

struct GenerateParams {
  std::size_t n_domains = 1000;
  double transient_fraction = 0.05;
  double early_removed_fraction = 0.05;
  double cert_coverage = 1.0;
  RdapFailureMix rdap_failure_mix;
  SnapshotLateness snapshot_lateness;
  /// Extra populations, as fractions of n_domains.
  double stale_fraction = 0.02;
  double dead_dv_fraction = 0.01;
  std::size_t background_per_tld = 10;
  double ns_change_fraction = 0.1;
  double blocklist_fraction = 0.1;
  /// Share of transients that live less than six hours.
  double short_lifetime_fraction = 0.55;
  double lag_median_minutes = 45.0;
  double lag_sigma = 1.5;
  int window_days = 7;
  std::string window_start = "2023-11-01";
  std::vector<std::string> tlds = {"com", "net", "xyz", "shop"};
  std::int64_t publish_offset_secs = 6 * 3600;
  std::int64_t rdap_fetch_delay_secs = 1800;
  std::int64_t rdap_reprobe_delay_secs = 6 * 3600;
  std::int64_t probe_interval_secs = 600;
  std::int64_t probe_horizon_secs = 48 * 3600;

  void validate() const {
    auto frac = [](const char* name, double v) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidParams, std::string(name) + " must be in [0,1]");
    };
    frac("transient_fraction", transient_fraction);
    frac("early_removed_fraction", early_removed_fraction);
    frac("cert_coverage", cert_coverage);
    frac("rdap_failure_mix.sync_delay", rdap_failure_mix.sync_delay);
    frac("rdap_failure_mix.post_deletion", rdap_failure_mix.post_deletion);
    frac("snapshot_lateness.fraction", snapshot_lateness.fraction);
    frac("stale_fraction", stale_fraction);
    frac("dead_dv_fraction", dead_dv_fraction);
    frac("ns_change_fraction", ns_change_fraction);
    frac("blocklist_fraction", blocklist_fraction);
    frac("short_lifetime_fraction", short_lifetime_fraction);
    if (transient_fraction + early_removed_fraction > 1.0) {
      throw Error(ErrorCode::InvalidParams, "transient_fraction + early_removed_fraction exceeds 1");
    }
    if (window_days < 3) throw Error(ErrorCode::InvalidParams, "window_days must be at least 3");
    if (tlds.empty()) throw Error(ErrorCode::InvalidParams, "at least one TLD is required");
    if (snapshot_lateness.max_days < 0 || snapshot_lateness.max_days > 3) {
      throw Error(ErrorCode::InvalidParams, "snapshot_lateness.max_days must be within the 3-day slack");
    }
    if (lag_median_minutes <= 0 || lag_sigma < 0) throw Error(ErrorCode::InvalidParams, "bad lag distribution");
    if (probe_interval_secs <= 0 || probe_horizon_secs < probe_interval_secs) {
      throw Error(ErrorCode::InvalidParams, "bad probe interval or horizon");
    }
    if (rdap_fetch_delay_secs < 15 * 60) {
      throw Error(ErrorCode::InvalidParams, "rdap_fetch_delay_secs must be at least 900 so post-deletion fetches are scriptable");
    }
  }
};

struct Scenario {
  std::uint64_t seed = 0;
  GenerateParams params;
  AnalysisWindow window;
  std::vector<DomainTimeline> domains;
  std::vector<ScriptedCert> certs;
  std::vector<SnapshotPublication> snapshots;
  Timestamp start_at;
  Timestamp close_at;

  Duration fetch_delay() const { return Duration{params.rdap_fetch_delay_secs}; }
  Duration reprobe_delay() const { return Duration{params.rdap_reprobe_delay_secs}; }
  Duration probe_interval() const { return Duration{params.probe_interval_secs}; }
  Duration probe_horizon() const { return Duration{params.probe_horizon_secs}; }
};

// ---------------------------------------------------------------------------
// Generation

namespace detail {

struct RegistrarInfo {
  const char* name;
  std::int64_t iana_id;
  double weight;
};

inline const std::vector<RegistrarInfo>& registrars() {
  static const std::vector<RegistrarInfo> kList = {
      {"GoDaddy", 146, 8213},        {"Hostinger", 1636, 6418},
      {"NameCheap", 1068, 4195},     {"Squarespace", 895, 2820},
      {"Public Domain Registry", 303, 2625}, {"IONOS", 83, 2352},
      {"Metaregistrar", 2288, 1866}, {"NameSilo", 1479, 1853},
      {"Network Solutions, LLC", 2, 1670}, {"Tucows", 69, 1304},
      {"Gandi", 81, 3000},           {"Porkbun", 1861, 3000},
      {"Dynadot", 472, 3042}};
  return kList;
}

inline const std::vector<std::vector<std::string>>& ns_pools() {
  static const std::vector<std::vector<std::string>> kPools = {
      {"ns1.hostdns-a.net", "ns2.hostdns-a.net"},
      {"dns1.parkingco.com", "dns2.parkingco.com"},
      {"a.cdn-edge.net", "b.cdn-edge.net", "c.cdn-edge.net"},
      {"ns1.freedns.xyz", "ns2.freedns.xyz"},
      {"ns-101.cloudhost.org", "ns-202.cloudhost.org"}};
  return kPools;
}

inline std::string make_label(Rng& rng, std::size_t index) {
  static const char* kAlpha = "abcdefghijklmnopqrstuvwxyz";
  std::string s;
  const auto len = rng.integer(4, 9);
  for (std::int64_t i = 0; i < len; ++i) s.push_back(kAlpha[rng.integer(0, 25)]);
  s.push_back('-');
  std::string idx;
  do {
    idx.insert(idx.begin(), "0123456789abcdefghijklmnopqrstuvwxyz"[index % 36]);
    index /= 36;
  } while (index);
  return s + idx;
}

inline Timestamp at_day_offset(Date d, std::int64_t secs) { return start_of(d) + Duration{secs}; }

}  // namespace detail

/// Builds a reproducible synthetic registry, CT stream and snapshot schedule.
inline Scenario generate(std::uint64_t seed, const GenerateParams& params) {
  using namespace std::chrono;
  params.validate();
  Rng rng(seed);
  Scenario sc;
  sc.seed = seed;
  sc.params = params;
  const Date wstart = parse_date(params.window_start);
  const Date wend = wstart + days(params.window_days - 1);
  sc.window = AnalysisWindow(wstart, wend);
  const Duration offset{params.publish_offset_secs};
  const Duration fetch_delay{params.rdap_fetch_delay_secs};

  // Snapshot schedule: one historical snapshot, then daily from the day before
  // the window until the end of the slack.
  const Date historical = wstart - days(300);
  const Date first_daily = wstart - days(1);
  const Date last_daily = wend + days(3);
  std::map<std::pair<std::string, Date>, Timestamp> published;
  for (const auto& tld : params.tlds) {
    published[{tld, historical}] = start_of(first_daily) + offset - seconds(1);
    for (Date d = first_daily; d <= last_daily; d += days(1)) {
      Duration late{0};
      if (d > first_daily && rng.chance(params.snapshot_lateness.fraction) && params.snapshot_lateness.max_days > 0) {
        late = days(rng.integer(1, params.snapshot_lateness.max_days));
      }
      published[{tld, d}] = start_of(d) + offset + late;
    }
  }
  auto publication_of = [&](const std::string& tld, Date d) { return published.at({tld, d}); };

  const auto& regs = detail::registrars();
  std::vector<double> reg_weights;
  for (const auto& r : regs) reg_weights.push_back(r.weight);
  double reg_total = 0;
  for (const double w : reg_weights) reg_total += w;
  auto pick_registrar = [&](DomainTimeline& t) {
    double x = rng.uniform() * reg_total;
    for (const auto& r : regs) {
      if ((x -= r.weight) < 0 || &r == &regs.back()) {
        t.registrar_name = r.name;
        t.registrar_iana_id = r.iana_id;
        return;
      }
    }
  };

  std::size_t index = 0;
  auto new_domain = [&](DomainKind kind) {
    DomainTimeline t;
    t.kind = kind;
    t.name = detail::make_label(rng, index++) + "." + rng.pick(params.tlds);
    pick_registrar(t);
    return t;
  };
  auto assign_ns = [&](DomainTimeline& t) {
    t.ns_sets.push_back({t.registration_ts, rng.pick(detail::ns_pools())});
  };

  const std::size_t n = params.n_domains;
  const auto n_transient = static_cast<std::size_t>(std::llround(params.transient_fraction * static_cast<double>(n)));
  const auto n_early = std::min(n - n_transient,
                                static_cast<std::size_t>(std::llround(params.early_removed_fraction * static_cast<double>(n))));
  const std::size_t n_normal = n - n_transient - n_early;

  // Certificate allocation per NRD category.
  const auto n_certs = static_cast<std::size_t>(std::llround(params.cert_coverage * static_cast<double>(n)));
  const auto cert_split = apportion(n_certs, {static_cast<double>(n_normal), static_cast<double>(n_transient),
                                              static_cast<double>(n_early)});

  // Stratified lag quantiles across all certified NRDs.
  std::vector<double> quantiles(n_certs);
  for (std::size_t i = 0; i < n_certs; ++i) quantiles[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(n_certs);
  rng.shuffle(quantiles);
  std::size_t next_quantile = 0;
  auto sample_lag = [&]() {
    const double z = inverse_normal_cdf(quantiles[next_quantile++]);
    const double mins = params.lag_median_minutes * std::exp(params.lag_sigma * z);
    return Duration{static_cast<std::int64_t>(std::llround(mins * 60.0))};
  };

  const std::int64_t window_secs = static_cast<std::int64_t>(params.window_days) * 86400;
  std::vector<std::pair<DomainTimeline, std::optional<Timestamp>>> nrds;  // timeline + first cert time

  auto cert_bound = [&](const DomainTimeline& t) {
    // The certificate has to precede the first publication of a snapshot that
    // contains the domain, and the deletion.
    Timestamp bound = Timestamp::max();
    const Date first = date_of(t.registration_ts) + days(1);
    if (!t.deletion_ts || start_of(first) < *t.deletion_ts) bound = publication_of(t.tld(), first) - minutes(1);
    if (t.deletion_ts) bound = std::min(bound, *t.deletion_ts - minutes(5));
    return bound;
  };

  auto make_category = [&](DomainKind kind, std::size_t count, std::size_t with_cert) {
    std::vector<bool> cert(count, false);
    std::fill(cert.begin(), cert.begin() + static_cast<std::ptrdiff_t>(with_cert), true);
    rng.shuffle(cert);
    std::size_t post_deletion_left = kind == DomainKind::Transient
                                         ? static_cast<std::size_t>(std::llround(params.rdap_failure_mix.post_deletion *
                                                                                 static_cast<double>(with_cert)))
                                         : 0;
    for (std::size_t i = 0; i < count; ++i) {
      DomainTimeline t = new_domain(kind);
      if (kind == DomainKind::Transient) {
        const Date day = wstart + days(rng.integer(0, params.window_days - 1));
        t.registration_ts = detail::at_day_offset(day, rng.integer(0, 23 * 3600 + 1800));
        const Timestamp midnight = start_of(day + days(1));
        const Duration room = midnight - minutes(1) - t.registration_ts;
        Duration life = rng.chance(params.short_lifetime_fraction) ? Duration{rng.integer(20 * 60, 6 * 3600 - 60)}
                                                                   : Duration{rng.integer(6 * 3600, 23 * 3600)};
        if (life > room) life = std::max<Duration>(room, minutes(20));
        t.deletion_ts = t.registration_ts + life;
      } else if (kind == DomainKind::EarlyRemoved) {
        const Date day = wstart + days(rng.integer(0, params.window_days - 3));
        t.registration_ts = detail::at_day_offset(day, rng.integer(0, 86399));
        const Timestamp earliest = start_of(day + days(1)) + minutes(1);
        const Timestamp latest = start_of(wend) - minutes(1);
        t.deletion_ts = earliest + Duration{rng.integer(0, std::max<std::int64_t>(0, (latest - earliest).count()))};
      } else {
        t.registration_ts = start_of(wstart) + Duration{rng.integer(0, window_secs - 1)};
        if (rng.chance(0.1)) t.deletion_ts = start_of(wend + days(4)) + hours(rng.integer(1, 240));
      }
      assign_ns(t);
      if (kind == DomainKind::Normal && rng.chance(params.ns_change_fraction)) {
        auto pool = rng.pick(detail::ns_pools());
        if (pool == t.ns_sets.front().ns) pool = detail::ns_pools()[0] == pool ? detail::ns_pools()[1] : detail::ns_pools()[0];
        t.ns_sets.push_back({t.registration_ts + Duration{rng.integer(3600, 20 * 3600)}, pool});
      }
      std::optional<Timestamp> cert_at;
      if (cert[i]) {
        Duration lag = sample_lag();
        const Timestamp bound = cert_bound(t);
        if (kind == DomainKind::Transient && post_deletion_left > 0) {
          --post_deletion_left;
          // Certificate minutes before deletion; the fetch lands after it.
          lag = (*t.deletion_ts - t.registration_ts) - minutes(rng.integer(6, 10));
          t.rdap_purge_on_delete = true;
        }
        if (t.registration_ts + lag > bound) lag = std::max<Duration>(Duration{0}, bound - t.registration_ts);
        cert_at = t.registration_ts + lag;
        if (!t.rdap_purge_on_delete && rng.chance(params.rdap_failure_mix.sync_delay)) {
          t.rdap_sync_delay = (*cert_at - t.registration_ts) + fetch_delay + seconds(rng.integer(3600, 4 * 3600));
        }
      }
      nrds.emplace_back(std::move(t), cert_at);
    }
  };
  make_category(DomainKind::Normal, n_normal, cert_split[0]);
  make_category(DomainKind::Transient, n_transient, cert_split[1]);
  make_category(DomainKind::EarlyRemoved, n_early, cert_split[2]);

  const auto n_stale = static_cast<std::size_t>(std::llround(params.stale_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n_stale; ++i) {
    DomainTimeline t = new_domain(DomainKind::Stale);
    t.registration_ts = start_of(wstart) - days(rng.integer(30, 90)) + seconds(rng.integer(0, 86399));
    t.delegated = false;
    assign_ns(t);
    nrds.emplace_back(std::move(t), start_of(wstart) + Duration{rng.integer(3600, window_secs - 3600)});
  }
  const auto n_dead = static_cast<std::size_t>(std::llround(params.dead_dv_fraction * static_cast<double>(n)));
  for (std::size_t i = 0; i < n_dead; ++i) {
    DomainTimeline t = new_domain(DomainKind::DeadDv);
    t.registration_ts = start_of(historical) - days(rng.integer(30, 200));
    t.deletion_ts = start_of(historical) + days(rng.integer(5, 90));
    t.cert_without_validation = true;
    t.rdap_purge_on_delete = true;
    assign_ns(t);
    nrds.emplace_back(std::move(t), start_of(wstart) + Duration{rng.integer(3600, window_secs - 3600)});
  }
  for (const auto& tld : params.tlds) {
    for (std::size_t i = 0; i < params.background_per_tld; ++i) {
      DomainTimeline t = new_domain(DomainKind::Background);
      t.name = t.label() + "." + tld;
      t.registration_ts = start_of(wstart) - days(rng.integer(400, 3000));
      assign_ns(t);
      nrds.emplace_back(std::move(t), start_of(wstart) + Duration{rng.integer(3600, window_secs - 3600)});
    }
  }

  // Certificates: the first one plus occasional re-issues and noise names.
  static const std::vector<std::string> kLogs = {"https://ct.example.org/argon2023/", "https://ct.example.net/xenon2023/",
                                                 "https://ct.example.com/nimbus2023/"};
  for (auto& [t, cert_at] : nrds) {
    if (cert_at) {
      std::vector<std::string> names = {t.name, "www." + t.name};
      if (rng.chance(0.3)) names.push_back("mail." + t.name);
      if (rng.chance(0.05)) names.push_back(t.tld());
      sc.certs.push_back({*cert_at, names, true, rng.pick(kLogs)});
      if (rng.chance(0.2)) sc.certs.push_back({*cert_at + seconds(rng.integer(1, 120)), {t.name}, false, rng.pick(kLogs)});
      if (rng.chance(0.2)) {
        Timestamp again = *cert_at + seconds(rng.integer(1, 600));
        if (t.kind != DomainKind::Transient && t.kind != DomainKind::EarlyRemoved && t.kind != DomainKind::Normal) {
          sc.certs.push_back({again, {"*." + t.name}, true, rng.pick(kLogs)});
        } else if (again <= cert_bound(t)) {
          sc.certs.push_back({again, {"*." + t.name}, true, rng.pick(kLogs)});
        }
      }
    }
    if (t.kind != DomainKind::Background && t.kind != DomainKind::Stale && rng.chance(params.blocklist_fraction)) {
      const Date reg = date_of(t.registration_ts);
      static const std::vector<std::string> kLists = {"list-a", "list-b", "list-c"};
      // Deletions of normal domains fall after the observation period, so
      // their flags stay before or during the active period.
      const bool observed_deletion = t.kind == DomainKind::Transient || t.kind == DomainKind::EarlyRemoved;
      const int choice = static_cast<int>(rng.integer(0, observed_deletion ? 2 : 1));
      Date flag = reg;
      if (choice == 0) {
        flag = reg - days(rng.integer(1, 10));
      } else if (choice == 1) {
        const Date last_active = observed_deletion ? std::max(reg, date_of(*t.deletion_ts) - days(1)) : reg + days(5);
        flag = reg + days(rng.integer(0, (last_active - reg).count()));
      } else {
        flag = date_of(*t.deletion_ts) + days(rng.integer(2, 20));
      }
      t.blocklist_flags.push_back({rng.pick(kLists), flag});
      if (rng.chance(0.3)) t.blocklist_flags.push_back({rng.pick(kLists), flag + days(rng.integer(0, 5))});
    }
    sc.domains.push_back(std::move(t));
  }
  std::stable_sort(sc.certs.begin(), sc.certs.end(), [](const auto& a, const auto& b) { return a.at < b.at; });
  std::sort(sc.domains.begin(), sc.domains.end(), [](const auto& a, const auto& b) { return a.name < b.name; });

  for (const auto& [key, at] : published) sc.snapshots.push_back({key.first, key.second, at});
  std::stable_sort(sc.snapshots.begin(), sc.snapshots.end(), [](const auto& a, const auto& b) {
    return a.published_at != b.published_at ? a.published_at < b.published_at
                                            : std::tie(a.tld, a.date) < std::tie(b.tld, b.date);
  });
  sc.start_at = sc.snapshots.front().published_at;
  Timestamp last = sc.snapshots.back().published_at;
  for (const auto& c : sc.certs) last = std::max(last, c.at);
  sc.close_at = last + Duration{params.probe_horizon_secs} + Duration{params.rdap_reprobe_delay_secs} +
                Duration{params.rdap_fetch_delay_secs} + hours(1);
  return sc;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json params_to_json(const GenerateParams& p) {
  return {{"n_domains", p.n_domains},
          {"transient_fraction", p.transient_fraction},
          {"early_removed_fraction", p.early_removed_fraction},
          {"cert_coverage", p.cert_coverage},
          {"rdap_failure_mix", {{"sync_delay", p.rdap_failure_mix.sync_delay}, {"post_deletion", p.rdap_failure_mix.post_deletion}}},
          {"snapshot_lateness", {{"fraction", p.snapshot_lateness.fraction}, {"max_days", p.snapshot_lateness.max_days}}},
          {"stale_fraction", p.stale_fraction},
          {"dead_dv_fraction", p.dead_dv_fraction},
          {"background_per_tld", p.background_per_tld},
          {"ns_change_fraction", p.ns_change_fraction},
          {"blocklist_fraction", p.blocklist_fraction},
          {"short_lifetime_fraction", p.short_lifetime_fraction},
          {"lag_median_minutes", p.lag_median_minutes},
          {"lag_sigma", p.lag_sigma},
          {"window_days", p.window_days},
          {"window_start", p.window_start},
          {"tlds", p.tlds},
          {"publish_offset_secs", p.publish_offset_secs},
          {"rdap_fetch_delay_secs", p.rdap_fetch_delay_secs},
          {"rdap_reprobe_delay_secs", p.rdap_reprobe_delay_secs},
          {"probe_interval_secs", p.probe_interval_secs},
          {"probe_horizon_secs", p.probe_horizon_secs}};
}

/// Missing keys keep their defaults.
inline GenerateParams params_from_json(const nlohmann::json& j) {
  GenerateParams p;
  try {
    auto get = [&](const char* k, auto& out) {
      if (j.contains(k)) out = j.at(k).get<std::decay_t<decltype(out)>>();
    };
    get("n_domains", p.n_domains);
    get("transient_fraction", p.transient_fraction);
    get("early_removed_fraction", p.early_removed_fraction);
    get("cert_coverage", p.cert_coverage);
    if (j.contains("rdap_failure_mix")) {
      const auto& m = j.at("rdap_failure_mix");
      p.rdap_failure_mix.sync_delay = m.value("sync_delay", 0.0);
      p.rdap_failure_mix.post_deletion = m.value("post_deletion", 0.0);
    }
    if (j.contains("snapshot_lateness")) {
      const auto& m = j.at("snapshot_lateness");
      p.snapshot_lateness.fraction = m.value("fraction", 0.0);
      p.snapshot_lateness.max_days = m.value("max_days", 2);
    }
    get("stale_fraction", p.stale_fraction);
    get("dead_dv_fraction", p.dead_dv_fraction);
    get("background_per_tld", p.background_per_tld);
    get("ns_change_fraction", p.ns_change_fraction);
    get("blocklist_fraction", p.blocklist_fraction);
    get("short_lifetime_fraction", p.short_lifetime_fraction);
    get("lag_median_minutes", p.lag_median_minutes);
    get("lag_sigma", p.lag_sigma);
    get("window_days", p.window_days);
    get("window_start", p.window_start);
    get("tlds", p.tlds);
    get("publish_offset_secs", p.publish_offset_secs);
    get("rdap_fetch_delay_secs", p.rdap_fetch_delay_secs);
    get("rdap_reprobe_delay_secs", p.rdap_reprobe_delay_secs);
    get("probe_interval_secs", p.probe_interval_secs);
    get("probe_horizon_secs", p.probe_horizon_secs);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidParams, std::string("scenario parameters: ") + e.what());
  }
  return p;
}

inline nlohmann::json to_json(const Scenario& sc) {
  nlohmann::json doms = nlohmann::json::array();
  for (const auto& t : sc.domains) {
    nlohmann::json ns = nlohmann::json::array();
    for (const auto& p : t.ns_sets) ns.push_back({{"from", format_rfc3339(p.from)}, {"ns", p.ns}});
    nlohmann::json flags = nlohmann::json::array();
    for (const auto& f : t.blocklist_flags) flags.push_back({{"list", f.list}, {"date", format_date(f.date)}});
    doms.push_back({{"name", t.name},
                    {"kind", to_string(t.kind)},
                    {"registration_ts", format_rfc3339(t.registration_ts)},
                    {"deletion_ts", t.deletion_ts ? nlohmann::json(format_rfc3339(*t.deletion_ts)) : nlohmann::json(nullptr)},
                    {"delegated", t.delegated},
                    {"cert_without_validation", t.cert_without_validation},
                    {"ns_sets", ns},
                    {"rdap_sync_delay_secs", t.rdap_sync_delay.count()},
                    {"rdap_purge_on_delete", t.rdap_purge_on_delete},
                    {"registrar_name", t.registrar_name},
                    {"registrar_iana_id", t.registrar_iana_id},
                    {"blocklist_flags", flags}});
  }
  nlohmann::json certs = nlohmann::json::array();
  for (const auto& c : sc.certs) {
    certs.push_back({{"at", format_rfc3339(c.at)}, {"names", c.names}, {"precert", c.precert}, {"log", c.log}});
  }
  nlohmann::json snaps = nlohmann::json::array();
  for (const auto& s : sc.snapshots) {
    snaps.push_back({{"tld", s.tld}, {"date", format_date(s.date)}, {"published_at", format_rfc3339(s.published_at)}});
  }
  return {{"seed", sc.seed},
          {"params", params_to_json(sc.params)},
          {"window", {{"start", format_date(sc.window.start)}, {"end", format_date(sc.window.end)}, {"slack_secs", sc.window.slack.count()}}},
          {"domains", doms},
          {"certs", certs},
          {"snapshots", snaps},
          {"start_at", format_rfc3339(sc.start_at)},
          {"close_at", format_rfc3339(sc.close_at)}};
}

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario sc;
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.params = params_from_json(j.at("params"));
    const auto& w = j.at("window");
    sc.window = AnalysisWindow(parse_date(w.at("start").get<std::string>()), parse_date(w.at("end").get<std::string>()),
                               Duration{w.at("slack_secs").get<std::int64_t>()});
    for (const auto& d : j.at("domains")) {
      DomainTimeline t;
      t.name = d.at("name").get<std::string>();
      t.kind = domain_kind_from_string(d.at("kind").get<std::string>());
      t.registration_ts = parse_rfc3339(d.at("registration_ts").get<std::string>());
      if (!d.at("deletion_ts").is_null()) t.deletion_ts = parse_rfc3339(d.at("deletion_ts").get<std::string>());
      t.delegated = d.at("delegated").get<bool>();
      t.cert_without_validation = d.at("cert_without_validation").get<bool>();
      for (const auto& p : d.at("ns_sets")) {
        t.ns_sets.push_back({parse_rfc3339(p.at("from").get<std::string>()), p.at("ns").get<std::vector<std::string>>()});
      }
      t.rdap_sync_delay = Duration{d.at("rdap_sync_delay_secs").get<std::int64_t>()};
      t.rdap_purge_on_delete = d.at("rdap_purge_on_delete").get<bool>();
      t.registrar_name = d.at("registrar_name").get<std::string>();
      t.registrar_iana_id = d.at("registrar_iana_id").get<std::int64_t>();
      for (const auto& f : d.at("blocklist_flags")) {
        t.blocklist_flags.push_back({f.at("list").get<std::string>(), parse_date(f.at("date").get<std::string>())});
      }
      sc.domains.push_back(std::move(t));
    }
    for (const auto& c : j.at("certs")) {
      sc.certs.push_back({parse_rfc3339(c.at("at").get<std::string>()), c.at("names").get<std::vector<std::string>>(),
                          c.at("precert").get<bool>(), c.at("log").get<std::string>()});
    }
    for (const auto& s : j.at("snapshots")) {
      sc.snapshots.push_back({s.at("tld").get<std::string>(), parse_date(s.at("date").get<std::string>()),
                              parse_rfc3339(s.at("published_at").get<std::string>())});
    }
    sc.start_at = parse_rfc3339(j.at("start_at").get<std::string>());
    sc.close_at = parse_rfc3339(j.at("close_at").get<std::string>());
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "scenario file not found: " + path.string());
  const auto j = nlohmann::json::parse(in, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ParseError, "scenario file is not valid JSON: " + path.string());
  // A file holding only {"seed":..., "params":{...}} is generated on the fly.
  if (!j.contains("domains")) return generate(j.value("seed", std::uint64_t{1}), params_from_json(j.value("params", nlohmann::json::object())));
  return scenario_from_json(j);
}

/// Indexes timelines by name for the mock servers.
class World {
 public:
  explicit World(const Scenario& sc) : scenario_(sc) {
    for (const auto& t : sc.domains) index_[t.name] = &t;
  }
  const DomainTimeline* find(const std::string& name) const {
    const auto it = index_.find(name);
    return it == index_.end() ? nullptr : it->second;
  }
  const Scenario& scenario() const { return scenario_; }

 private:
  const Scenario& scenario_;
  std::unordered_map<std::string, const DomainTimeline*> index_;
};

}  // namespace darkdns::sim
