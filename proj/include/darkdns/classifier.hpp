#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "darkdns/candidate.hpp"
#include "darkdns/error.hpp"
#include "darkdns/lifecycle_state.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

struct AnalysisWindow {
  Date start;
  Date end;
  Duration slack = std::chrono::hours(72);

  AnalysisWindow() = default;
  AnalysisWindow(Date s, Date e, Duration sl = std::chrono::hours(72)) : start(s), end(e), slack(sl) {
    if (end < start) throw Error(ErrorCode::ConfigError, "analysis window ends before it starts");
  }

  /// Dates searched for zone appearances: [first_seen - slack, end + slack].
  bool in_appearance_range(Date d, Timestamp first_seen) const {
    return d >= date_of(first_seen - slack) && start_of(d) <= start_of(end) + slack;
  }
};

struct ZoneAppearance {
  std::string tld;
  Date date;
  auto operator<=>(const ZoneAppearance&) const = default;
};

struct StateTransition {
  LifecycleState to;
  Timestamp at;
};

struct DomainLifecycle {
  RegistrableDomain domain;
  LifecycleState state = LifecycleState::Candidate;
  Timestamp first_seen_ct;
  std::string source_log;
  std::optional<RdapRecord> rdap;
  std::optional<RdapFailure> rdap_failure;
  std::optional<ValidationOutcome> validation;
  std::vector<ZoneAppearance> zone_appearances;
  std::optional<Date> zone_removed_on;
  std::optional<Timestamp> deletion_inferred_at;
  std::optional<Timestamp> last_valid_ns;
  std::optional<Timestamp> final_class_at;
  /// Incremented for each re-registration of the same name.
  int generation = 0;
  std::vector<StateTransition> transitions;

  static DomainLifecycle from_candidate(const CandidateNRD& c, int generation = 0) {
    DomainLifecycle lc;
    lc.domain = c.domain;
    lc.first_seen_ct = c.first_seen_ct;
    lc.source_log = c.source_log;
    lc.generation = generation;
    return lc;
  }

  CandidateNRD candidate() const { return CandidateNRD{domain, first_seen_ct, source_log}; }
};

// ---------------------------------------------------------------------------
// Events

struct RdapOk {
  RdapRecord record;
  Timestamp at;
};
struct RdapFail {
  RdapFailure failure;
  Timestamp at;
};
struct ZoneAppeared {
  std::string tld;
  Date date;
  Timestamp at;
};
struct ZoneRemoved {
  std::string tld;
  Date date;
  Timestamp at;
};
struct WindowClosed {
  Timestamp at;
};

using LifecycleEvent = std::variant<RdapOk, RdapFail, ZoneAppeared, ZoneRemoved, WindowClosed>;

inline std::string event_name(const LifecycleEvent& e) {
  static constexpr const char* kNames[] = {"RdapOk", "RdapFail", "ZoneAppeared", "ZoneRemoved", "WindowClosed"};
  return kNames[e.index()];
}

namespace detail {

inline void transition(DomainLifecycle& lc, LifecycleState to, Timestamp at) {
  if (!can_transition(lc.state, to)) {
    throw Error(ErrorCode::IllegalTransition, lc.domain.full() + ": " + std::string(to_string(lc.state)) + " -> " +
                                                  std::string(to_string(to)));
  }
  lc.state = to;
  lc.transitions.push_back({to, at});
  if (is_terminal(to)) lc.final_class_at = at;
}

[[noreturn]] inline void illegal(const DomainLifecycle& lc, const LifecycleEvent& e) {
  throw Error(ErrorCode::IllegalTransition,
              lc.domain.full() + ": " + event_name(e) + " not allowed in " + std::string(to_string(lc.state)));
}

inline bool has_appearance_in_range(const DomainLifecycle& lc, const AnalysisWindow& w) {
  return std::any_of(lc.zone_appearances.begin(), lc.zone_appearances.end(),
                     [&](const ZoneAppearance& a) { return w.in_appearance_range(a.date, lc.first_seen_ct); });
}

/// Applies zone facts gathered while the domain was still a candidate.
inline void settle_confirmed(DomainLifecycle& lc, const AnalysisWindow& w, Timestamp at) {
  if (lc.state != LifecycleState::ConfirmedNrd || !has_appearance_in_range(lc, w)) return;
  transition(lc, LifecycleState::InZone, at);
  if (lc.zone_removed_on && *lc.zone_removed_on <= w.end) transition(lc, LifecycleState::EarlyRemoved, at);
}

}  // namespace detail

/// Deterministic state machine step. Throws IllegalTransition for events that
/// cannot occur in the current state.
inline DomainLifecycle apply_event(DomainLifecycle lc, const LifecycleEvent& event, const AnalysisWindow& window) {
  using S = LifecycleState;
  std::visit(
      [&](const auto& e) {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, RdapOk>) {
          if (lc.state != S::Candidate) detail::illegal(lc, event);
          lc.validation = validate(lc.candidate(), e.record);
          lc.rdap = e.record;
          if (lc.validation->verdict == Verdict::Confirmed) {
            detail::transition(lc, S::ConfirmedNrd, e.at);
            detail::settle_confirmed(lc, window, e.at);
          } else {
            detail::transition(lc, S::Misclassified, e.at);
          }
        } else if constexpr (std::is_same_v<T, RdapFail>) {
          if (lc.state != S::Candidate) detail::illegal(lc, event);
          lc.rdap_failure = e.failure;
          detail::transition(lc, S::RdapFailed, e.at);
        } else if constexpr (std::is_same_v<T, ZoneAppeared>) {
          if (lc.state == S::Transient || lc.state == S::EarlyRemoved) detail::illegal(lc, event);
          const ZoneAppearance a{e.tld, e.date};
          if (std::find(lc.zone_appearances.begin(), lc.zone_appearances.end(), a) == lc.zone_appearances.end()) {
            lc.zone_appearances.insert(std::upper_bound(lc.zone_appearances.begin(), lc.zone_appearances.end(), a), a);
          }
          detail::settle_confirmed(lc, window, e.at);
        } else if constexpr (std::is_same_v<T, ZoneRemoved>) {
          if (lc.state == S::Transient || lc.state == S::EarlyRemoved || lc.zone_appearances.empty()) {
            detail::illegal(lc, event);
          }
          if (!lc.zone_removed_on || e.date < *lc.zone_removed_on) lc.zone_removed_on = e.date;
          if (lc.state == S::InZone && e.date <= window.end) detail::transition(lc, S::EarlyRemoved, e.at);
        } else {
          if (lc.state == S::ConfirmedNrd && !detail::has_appearance_in_range(lc, window)) {
            detail::transition(lc, S::Transient, e.at);
          }
          if (!lc.final_class_at) lc.final_class_at = e.at;
        }
      },
      event);
  return lc;
}

// ---------------------------------------------------------------------------
// Transient selection

inline std::vector<RegistrableDomain> raw_transients(const std::vector<DomainLifecycle>& all) {
  std::set<RegistrableDomain> out;
  for (const auto& lc : all) {
    if (lc.state == LifecycleState::Transient) out.insert(lc.domain);
  }
  return {out.begin(), out.end()};
}

/// A TRANSIENT lifecycle survives finalization when it has RDAP data, no RDAP
/// failure, and a registration no more than 24h before the window start.
inline bool is_final_transient(const DomainLifecycle& lc, const AnalysisWindow& window) {
  return lc.state == LifecycleState::Transient && lc.rdap && !lc.rdap_failure &&
         lc.rdap->registration_ts >= start_of(window.start) - std::chrono::hours(24);
}

inline std::vector<RegistrableDomain> finalize_transients(const std::vector<DomainLifecycle>& all,
                                                          const AnalysisWindow& window) {
  std::set<RegistrableDomain> out;
  for (const auto& lc : all) {
    if (is_final_transient(lc, window)) out.insert(lc.domain);
  }
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Detection lag

struct CdfPoint {
  Duration x;
  double y;
};

/// Lags (first_seen_ct - registration) of CONFIRMED validations, clamped at 0.
inline std::vector<Duration> confirmed_lags(const std::vector<DomainLifecycle>& all) {
  std::vector<Duration> lags;
  for (const auto& lc : all) {
    if (lc.validation && lc.validation->verdict == Verdict::Confirmed) {
      lags.push_back(std::max(lc.validation->lag, Duration{0}));
    }
  }
  return lags;
}

/// Empirical CDF sampled every `resolution` from 0 to the first point that
/// reaches 1.0.
inline std::vector<CdfPoint> cdf_of(std::vector<Duration> lags, Duration resolution = std::chrono::minutes(1)) {
  std::vector<CdfPoint> out;
  if (lags.empty()) return out;
  std::sort(lags.begin(), lags.end());
  const auto n = static_cast<double>(lags.size());
  for (Duration x{0};; x += resolution) {
    const auto count = std::upper_bound(lags.begin(), lags.end(), x) - lags.begin();
    out.push_back({x, static_cast<double>(count) / n});
    if (static_cast<std::size_t>(count) == lags.size()) break;
  }
  return out;
}

inline std::vector<CdfPoint> detection_lag_cdf(const std::vector<DomainLifecycle>& all,
                                               Duration resolution = std::chrono::minutes(1)) {
  return cdf_of(confirmed_lags(all), resolution);
}

inline double cdf_at(const std::vector<CdfPoint>& cdf, Duration x) {
  double y = 0.0;
  for (const auto& p : cdf) {
    if (p.x > x) break;
    y = p.y;
  }
  return cdf.empty() || x < cdf.front().x ? 0.0 : y;
}

/// CSV with x in minutes.
inline std::string cdf_to_csv(const std::vector<CdfPoint>& cdf) {
  std::ostringstream os;
  os << "x,y\n";
  for (const auto& p : cdf) {
    os << std::chrono::duration_cast<std::chrono::minutes>(p.x).count() << ',' << nlohmann::json(p.y).dump() << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Lifetime

struct LifetimeCounters {
  std::atomic<std::uint64_t> negative_clamped{0};
  std::atomic<std::uint64_t> missing_probe_data{0};
};

/// last valid NS response - RDAP registration, clamped at zero.
inline Duration lifetime(const DomainLifecycle& lc, LifetimeCounters* counters = nullptr) {
  if (!lc.rdap) throw Error(ErrorCode::InvalidParams, lc.domain.full() + " has no RDAP registration time");
  if (!lc.last_valid_ns) {
    if (counters) ++counters->missing_probe_data;
    throw Error(ErrorCode::MissingProbeData, lc.domain.full() + " never had a valid NS response");
  }
  const Duration d = *lc.last_valid_ns - lc.rdap->registration_ts;
  if (d < Duration{0}) {
    if (counters) ++counters->negative_clamped;
    return Duration{0};
  }
  return d;
}

struct LifetimeReport {
  std::map<std::string, Duration> lifetimes;
  std::vector<std::string> missing_probe_data;
  std::uint64_t negative_clamped = 0;
};

inline LifetimeReport lifetimes_of(const std::vector<DomainLifecycle>& transients) {
  LifetimeReport rep;
  LifetimeCounters counters;
  for (const auto& lc : transients) {
    try {
      rep.lifetimes[lc.domain.full()] = lifetime(lc, &counters);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::MissingProbeData) throw;
      rep.missing_probe_data.push_back(lc.domain.full());
    }
  }
  rep.negative_clamped = counters.negative_clamped;
  return rep;
}

/// Lower median for even counts.
inline Duration median(std::vector<Duration> v) {
  if (v.empty()) throw Error(ErrorCode::InvalidParams, "median of an empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

/// Counts per bin; bin k covers [k*bin, (k+1)*bin).
inline std::vector<std::pair<std::int64_t, std::uint64_t>> histogram(const std::vector<Duration>& values,
                                                                     Duration bin = std::chrono::hours(1)) {
  std::map<std::int64_t, std::uint64_t> counts;
  for (const auto& v : values) ++counts[v / bin];
  if (counts.empty()) return {};
  std::vector<std::pair<std::int64_t, std::uint64_t>> out;
  for (std::int64_t k = 0; k <= counts.rbegin()->first; ++k) out.emplace_back(k, counts.count(k) ? counts[k] : 0);
  return out;
}

inline std::string histogram_to_csv(const std::vector<std::pair<std::int64_t, std::uint64_t>>& h) {
  std::ostringstream os;
  os << "x,y\n";
  for (const auto& [k, n] : h) os << k << ',' << n << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Registrar aggregation

struct RegistrarRow {
  std::string registrar;
  std::uint64_t count = 0;
  /// Unrounded 100*count/total.
  double pct = 0.0;
};

/// Half-up rounding of a percentage to `decimals` places.
inline double round_pct(double pct, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::floor(pct * scale + 0.5 + 1e-9) / scale;
}

inline std::string registrar_key(const RdapRecord& r) {
  if (!r.registrar_name.empty()) return r.registrar_name;
  if (r.registrar_iana_id) return "IANA " + std::to_string(*r.registrar_iana_id);
  return "(unknown)";
}

/// Ranked by count (ties by name). With top_n > 0, groups past the first top_n
/// are folded into a trailing "Others" row.
inline std::vector<RegistrarRow> registrar_distribution(const std::vector<DomainLifecycle>& transients,
                                                        std::size_t top_n = 0) {
  std::map<std::string, std::uint64_t> counts;
  std::uint64_t total = 0;
  for (const auto& lc : transients) {
    if (!lc.rdap) throw Error(ErrorCode::InvalidParams, lc.domain.full() + " has no RDAP data");
    ++counts[registrar_key(*lc.rdap)];
    ++total;
  }
  std::vector<RegistrarRow> rows;
  for (const auto& [name, n] : counts) rows.push_back({name, n, 0.0});
  std::sort(rows.begin(), rows.end(), [](const RegistrarRow& a, const RegistrarRow& b) {
    return a.count != b.count ? a.count > b.count : a.registrar < b.registrar;
  });
  if (top_n > 0 && rows.size() > top_n) {
    RegistrarRow others{"Others", 0, 0.0};
    for (std::size_t i = top_n; i < rows.size(); ++i) others.count += rows[i].count;
    rows.resize(top_n);
    rows.push_back(others);
  }
  for (auto& r : rows) r.pct = total ? 100.0 * static_cast<double>(r.count) / static_cast<double>(total) : 0.0;
  return rows;
}

inline std::string registrar_table_csv(const std::vector<RegistrarRow>& rows, int decimals = 2) {
  std::ostringstream os;
  os << "registrar,count,pct\n";
  os.setf(std::ios::fixed);
  os.precision(decimals);
  for (const auto& r : rows) {
    const bool quote = r.registrar.find(',') != std::string::npos;
    os << (quote ? "\"" + r.registrar + "\"" : r.registrar) << ',' << r.count << ',' << round_pct(r.pct, decimals)
       << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const DomainLifecycle& lc) {
  auto opt_ts = [](const std::optional<Timestamp>& t) {
    return t ? nlohmann::json(format_rfc3339(*t)) : nlohmann::json(nullptr);
  };
  nlohmann::json j;
  j["domain"] = lc.domain.full();
  j["state"] = to_string(lc.state);
  j["first_seen_ct"] = format_rfc3339(lc.first_seen_ct);
  j["source_log"] = lc.source_log;
  j["rdap"] = lc.rdap ? to_json(*lc.rdap) : nlohmann::json(nullptr);
  j["rdap_failure"] = lc.rdap_failure ? to_json(*lc.rdap_failure) : nlohmann::json(nullptr);
  if (lc.validation) {
    j["validation"] = {{"verdict", to_string(lc.validation->verdict)}, {"lag_secs", lc.validation->lag.count()}};
  } else {
    j["validation"] = nullptr;
  }
  nlohmann::json apps = nlohmann::json::array();
  for (const auto& a : lc.zone_appearances) apps.push_back({{"tld", a.tld}, {"date", format_date(a.date)}});
  j["zone_appearances"] = apps;
  j["zone_removed_on"] = lc.zone_removed_on ? nlohmann::json(format_date(*lc.zone_removed_on)) : nlohmann::json(nullptr);
  j["deletion_inferred_at"] = opt_ts(lc.deletion_inferred_at);
  j["last_valid_ns"] = opt_ts(lc.last_valid_ns);
  j["final_class_at"] = opt_ts(lc.final_class_at);
  j["generation"] = lc.generation;
  nlohmann::json tr = nlohmann::json::array();
  for (const auto& t : lc.transitions) tr.push_back({{"to", to_string(t.to)}, {"at", format_rfc3339(t.at)}});
  j["transitions"] = tr;
  return j;
}

inline DomainLifecycle lifecycle_from_json(const nlohmann::json& j) {
  auto opt_ts = [&](const char* k) -> std::optional<Timestamp> {
    return j.at(k).is_null() ? std::nullopt : std::optional<Timestamp>(parse_rfc3339(j.at(k).get<std::string>()));
  };
  DomainLifecycle lc;
  lc.domain = registrable_from_full(j.at("domain").get<std::string>());
  lc.state = lifecycle_state_from_string(j.at("state").get<std::string>());
  lc.first_seen_ct = parse_rfc3339(j.at("first_seen_ct").get<std::string>());
  lc.source_log = j.at("source_log").get<std::string>();
  if (!j.at("rdap").is_null()) lc.rdap = rdap_record_from_json(j.at("rdap"));
  if (!j.at("rdap_failure").is_null()) lc.rdap_failure = rdap_failure_from_json(j.at("rdap_failure"));
  if (!j.at("validation").is_null()) {
    const auto& v = j.at("validation");
    lc.validation = ValidationOutcome{lc.domain,
                                      v.at("verdict").get<std::string>() == "CONFIRMED" ? Verdict::Confirmed
                                                                                         : Verdict::Misclassified,
                                      Duration{v.at("lag_secs").get<std::int64_t>()}};
  }
  for (const auto& a : j.at("zone_appearances")) {
    lc.zone_appearances.push_back({a.at("tld").get<std::string>(), parse_date(a.at("date").get<std::string>())});
  }
  if (!j.at("zone_removed_on").is_null()) lc.zone_removed_on = parse_date(j.at("zone_removed_on").get<std::string>());
  lc.deletion_inferred_at = opt_ts("deletion_inferred_at");
  lc.last_valid_ns = opt_ts("last_valid_ns");
  lc.final_class_at = opt_ts("final_class_at");
  lc.generation = j.at("generation").get<int>();
  for (const auto& t : j.at("transitions")) {
    lc.transitions.push_back(
        {lifecycle_state_from_string(t.at("to").get<std::string>()), parse_rfc3339(t.at("at").get<std::string>())});
  }
  return lc;
}

}  // namespace darkdns
