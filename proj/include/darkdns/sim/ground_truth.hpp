#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "darkdns/blocklist.hpp"
#include "darkdns/lifecycle_state.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/sim/scenario.hpp"

namespace darkdns::sim {

/// What the pipeline should conclude about one scripted domain, derived only
/// from the scenario script.
struct ExpectedDomain {
  std::string name;
  DomainKind kind = DomainKind::Normal;
  /// A precertificate naming the domain was logged.
  bool certified = false;
  bool cert_before_deletion = false;
  /// The pipeline should open a lifecycle.
  bool candidate = false;
  std::optional<Timestamp> first_seen;
  std::optional<LifecycleState> state;
  std::optional<RdapFailureCause> cause;
  std::optional<Duration> detection_lag;
  /// Last probe-grid time with a live delegation, minus registration.
  std::optional<Duration> lifetime;
  /// Scripted deletion minus registration.
  std::optional<Duration> scripted_lifetime;
  std::optional<Date> first_flag;
  std::optional<FlagCategory> flag_category;
};

struct GroundTruth {
  std::map<std::string, ExpectedDomain> domains;

  std::set<std::string> in_state(LifecycleState s) const {
    std::set<std::string> out;
    for (const auto& [name, e] : domains) {
      if (e.state == s) out.insert(name);
    }
    return out;
  }
  std::set<std::string> transients() const { return in_state(LifecycleState::Transient); }
  /// Registered transients whose existence was observable in CT at all.
  std::set<std::string> all_transient_registrations() const {
    std::set<std::string> out;
    for (const auto& [name, e] : domains) {
      if (e.kind == DomainKind::Transient) out.insert(name);
    }
    return out;
  }
  std::size_t count(LifecycleState s) const { return in_state(s).size(); }
};

namespace detail {

inline std::string last_two_labels(std::string name) {
  if (name.rfind("*.", 0) == 0) name = name.substr(2);
  const auto last = name.rfind('.');
  if (last == std::string::npos || last == 0) return {};
  const auto prev = name.rfind('.', last - 1);
  return prev == std::string::npos ? name : name.substr(prev + 1);
}

}  // namespace detail

/// Exhaustive rule evaluation over the script. Assumes every scenario TLD is a
/// single-label public suffix.
inline GroundTruth derive_ground_truth(const Scenario& sc) {
  using namespace std::chrono;
  GroundTruth gt;
  std::map<std::string, Timestamp> first_precert;
  for (const auto& c : sc.certs) {
    if (!c.precert) continue;
    for (const auto& n : c.names) {
      const auto reg = detail::last_two_labels(n);
      if (reg.empty()) continue;
      const auto it = first_precert.find(reg);
      if (it == first_precert.end() || c.at < it->second) first_precert[reg] = c.at;
    }
  }
  std::map<std::string, std::vector<const SnapshotPublication*>> snaps;
  for (const auto& s : sc.snapshots) snaps[s.tld].push_back(&s);

  const Duration fetch_delay = sc.fetch_delay();
  const Duration reprobe_delay = sc.reprobe_delay();
  const Duration interval = sc.probe_interval();
  const std::int64_t rounds = sc.probe_horizon() / interval;

  for (const auto& t : sc.domains) {
    ExpectedDomain e;
    e.name = t.name;
    e.kind = t.kind;
    if (t.deletion_ts) e.scripted_lifetime = *t.deletion_ts - t.registration_ts;
    const auto fc = first_precert.find(t.name);
    if (fc != first_precert.end()) {
      const Timestamp tc = fc->second;
      e.certified = true;
      e.cert_before_deletion = !t.deletion_ts || tc < *t.deletion_ts;
      // Known to the newest snapshot published by then?
      std::optional<Date> latest;
      for (const auto* s : snaps[t.tld()]) {
        if (s->published_at <= tc && (!latest || s->date > *latest)) latest = s->date;
      }
      e.candidate = latest && !t.in_snapshot(*latest);
    }
    if (!e.candidate) {
      gt.domains[t.name] = std::move(e);
      continue;
    }
    const Timestamp tc = fc->second;
    e.first_seen = tc;
    const Timestamp fetch_at = tc + fetch_delay;
    bool have_record = false;
    if (t.rdap_available_at(fetch_at)) {
      have_record = true;
      const Duration lag = tc - t.registration_ts;
      if (lag > hours(24) || lag < -hours(24)) {
        e.state = LifecycleState::Misclassified;
      } else {
        e.detection_lag = lag;
        std::vector<Date> appearances;
        std::vector<Date> absences;
        for (const auto* s : snaps[t.tld()]) {
          if (s->date < date_of(tc - sc.window.slack) || start_of(s->date) > start_of(sc.window.end) + sc.window.slack) continue;
          (t.in_snapshot(s->date) ? appearances : absences).push_back(s->date);
        }
        if (appearances.empty()) {
          e.state = LifecycleState::Transient;
        } else {
          const Date first = *std::min_element(appearances.begin(), appearances.end());
          std::optional<Date> removed;
          for (const Date d : absences) {
            if (d > first && (!removed || d < *removed)) removed = d;
          }
          e.state = removed && *removed <= sc.window.end ? LifecycleState::EarlyRemoved : LifecycleState::InZone;
        }
      }
    } else {
      e.state = LifecycleState::RdapFailed;
      const Date cutoff = date_of(tc - sc.window.slack);
      bool historical = false;
      for (const auto* s : snaps[t.tld()]) historical = historical || (s->date < cutoff && t.in_snapshot(s->date));
      if (historical) {
        e.cause = RdapFailureCause::NonexistentWithCert;
      } else {
        const Timestamp again = fetch_at + reprobe_delay;
        e.cause = t.rdap_available_at(again) || t.delegated_at(again) ? RdapFailureCause::NotYetSynced
                                                                      : RdapFailureCause::TooLate;
      }
    }

    // Probe grid starts when the certificate is processed.
    std::optional<Timestamp> last_live;
    std::optional<Timestamp> first_dead_after;
    for (std::int64_t k = 0; k < rounds; ++k) {
      const Timestamp at = tc + k * interval;
      if (t.delegated_at(at)) {
        last_live = at;
        first_dead_after.reset();
      } else if (last_live && !first_dead_after) {
        first_dead_after = at;
      }
    }
    if (have_record && last_live) e.lifetime = std::max(Duration{0}, *last_live - t.registration_ts);

    if (have_record && !t.blocklist_flags.empty()) {
      Date flag = t.blocklist_flags.front().date;
      for (const auto& f : t.blocklist_flags) flag = std::min(flag, f.date);
      e.first_flag = flag;
      const Date reg = date_of(t.registration_ts);
      if (flag < reg) {
        e.flag_category = FlagCategory::BeforeRegistration;
      } else if (t.deletion_ts && flag > date_of(*t.deletion_ts)) {
        e.flag_category = FlagCategory::PostDeletion;
      } else {
        e.flag_category = FlagCategory::WhileActive;
      }
    }
    gt.domains[t.name] = std::move(e);
  }
  return gt;
}

}  // namespace darkdns::sim
