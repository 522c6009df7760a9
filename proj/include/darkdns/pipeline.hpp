#pragma once

#include <algorithm>
#include <chrono>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "darkdns/classifier.hpp"
#include "darkdns/clock.hpp"
#include "darkdns/ct_ingest.hpp"
#include "darkdns/feed.hpp"
#include "darkdns/metrics.hpp"
#include "darkdns/probe.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/zone_store.hpp"

namespace darkdns {

struct PipelineOptions {
  AnalysisWindow window;
  /// Delay between the CT sighting and the RDAP fetch.
  Duration fetch_delay{0};
  /// Delay before the single evidence re-probe after a not-found answer.
  Duration reprobe_delay = std::chrono::hours(6);
  bool enroll_on_candidate = true;
  bool include_leaf_certs = false;
};

/// Wires ct-ingest -> rdap-client -> probe-scheduler -> classifier -> feed.
/// Single-threaded apart from the probe worker pool; every entry point reads
/// time from the injected clock.
class Pipeline {
 public:
  Pipeline(PipelineOptions opts, const SuffixRuleSet& rules, ZoneStore& zones, RdapClient& rdap,
           ProbeScheduler& probes, FeedWriter& feed, const Clock& clock, Metrics& metrics)
      : opts_(opts),
        rules_(rules),
        zones_(zones),
        rdap_(rdap),
        probes_(probes),
        feed_(feed),
        clock_(clock),
        metrics_(metrics),
        seen_(window_length() + opts.window.slack) {}

  // -------------------------------------------------------------------------
  // Inputs

  void on_cert_event(const CertEvent& ev) {
    IngestCounters c;
    ++c.events;
    const auto domains = extract_candidates(ev, rules_, &c, opts_.include_leaf_certs);
    const auto res = filter_new(domains, zones_, seen_, ev.seen_at, ev.log_id, &c);
    flush_counters(c);
    for (const auto& cand : res.emitted) start_lifecycle(cand);
  }

  /// Records a malformed input line.
  void on_malformed_event() { metrics_.add("malformed_events"); }

  /// Call after the snapshot is in the zone store. Repeated calls for the same
  /// (tld, date) are ignored.
  void on_snapshot(const std::string& tld, Date date) {
    if (!processed_snapshots_.insert({tld, date}).second) return;
    metrics_.add("snapshots_processed");
    const auto snap = zones_.snapshot(tld, date);
    if (!snap) throw Error(ErrorCode::MissingSnapshot, "." + tld + " " + format_date(date) + " is not loaded");
    const auto it = by_tld_.find(tld);
    if (it == by_tld_.end()) return;
    const Timestamp now = clock_.now();
    for (const auto& name : it->second) {
      auto& lc = active_.at(name);
      if (lc.state == LifecycleState::Transient || lc.state == LifecycleState::EarlyRemoved) continue;
      if (!opts_.window.in_appearance_range(date, lc.first_seen_ct)) continue;
      if (snap->contains(lc.domain.label())) apply(lc, ZoneAppeared{tld, date, now});
      reconcile_removal(lc, now);
    }
  }

  // -------------------------------------------------------------------------
  // Time-driven work

  std::optional<Timestamp> next_due() const {
    std::optional<Timestamp> t = probes_.next_due();
    auto consider = [&](const std::set<std::pair<Timestamp, std::string>>& q) {
      if (!q.empty() && (!t || q.begin()->first < *t)) t = q.begin()->first;
    };
    consider(rdap_queue_);
    consider(reprobe_queue_);
    return t;
  }

  void run_due() {
    const Timestamp now = clock_.now();
    if (const auto due = probes_.next_due(); due && *due <= now) {
      const auto results = probes_.run_due();
      metrics_.add("probes_sent", results.size());
    }
    drain(rdap_queue_, now, [&](const std::string& d) { return fetch(d, now); });
    drain(reprobe_queue_, now, [&](const std::string& d) { return reprobe(d, now); });
  }

  /// Applies WindowClosed to every open lifecycle.
  void close_window() {
    const Timestamp now = clock_.now();
    for (auto& [name, lc] : active_) {
      merge_probe_facts(lc);
      apply(lc, WindowClosed{now});
    }
    window_closed_ = true;
  }

  bool window_closed() const { return window_closed_; }

  // -------------------------------------------------------------------------
  // Results

  /// Every lifecycle (earlier generations included), ordered by domain then
  /// generation, with the latest probe facts merged in.
  std::vector<DomainLifecycle> lifecycles() const {
    std::vector<DomainLifecycle> out = archived_;
    for (const auto& [name, lc] : active_) {
      out.push_back(lc);
      merge_probe_facts(out.back());
    }
    std::sort(out.begin(), out.end(), [](const DomainLifecycle& a, const DomainLifecycle& b) {
      return a.domain != b.domain ? a.domain < b.domain : a.generation < b.generation;
    });
    return out;
  }

  const DomainLifecycle* lifecycle(const std::string& domain) const {
    const auto it = active_.find(domain);
    return it == active_.end() ? nullptr : &it->second;
  }

  const std::set<std::pair<std::string, Date>>& processed_snapshots() const { return processed_snapshots_; }
  const PipelineOptions& options() const { return opts_; }

  // -------------------------------------------------------------------------
  // Checkpoint

  nlohmann::json checkpoint() const {
    nlohmann::json j;
    j["seen"] = seen_.to_json();
    nlohmann::json active = nlohmann::json::array();
    for (const auto& [name, lc] : active_) active.push_back(to_json(lc));
    j["active"] = active;
    nlohmann::json archived = nlohmann::json::array();
    for (const auto& lc : archived_) archived.push_back(to_json(lc));
    j["archived"] = archived;
    auto queue = [](const std::set<std::pair<Timestamp, std::string>>& q) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& [t, d] : q) a.push_back({to_epoch(t), d});
      return a;
    };
    j["rdap_queue"] = queue(rdap_queue_);
    j["reprobe_queue"] = queue(reprobe_queue_);
    nlohmann::json pending = nlohmann::json::object();
    for (const auto& [d, f] : pending_failures_) pending[d] = to_json(f);
    j["pending_failures"] = pending;
    nlohmann::json snaps = nlohmann::json::array();
    for (const auto& [tld, date] : processed_snapshots_) snaps.push_back({tld, format_date(date)});
    j["processed_snapshots"] = snaps;
    j["window_closed"] = window_closed_;
    j["probes"] = probes_.to_json();
    j["rate_limiter"] = rdap_.limiter().to_json();
    j["metrics"] = metrics_.snapshot();
    return j;
  }

  void restore(const nlohmann::json& j) {
    try {
      seen_.restore(j.at("seen"));
      active_.clear();
      by_tld_.clear();
      for (const auto& lj : j.at("active")) {
        auto lc = lifecycle_from_json(lj);
        by_tld_[lc.domain.tld()].insert(lc.domain.full());
        active_[lc.domain.full()] = std::move(lc);
      }
      archived_.clear();
      for (const auto& lj : j.at("archived")) archived_.push_back(lifecycle_from_json(lj));
      auto queue = [](const nlohmann::json& a) {
        std::set<std::pair<Timestamp, std::string>> q;
        for (const auto& e : a) q.emplace(from_epoch(e.at(0).get<std::int64_t>()), e.at(1).get<std::string>());
        return q;
      };
      rdap_queue_ = queue(j.at("rdap_queue"));
      reprobe_queue_ = queue(j.at("reprobe_queue"));
      pending_failures_.clear();
      for (const auto& [d, f] : j.at("pending_failures").items()) pending_failures_[d] = rdap_failure_from_json(f);
      processed_snapshots_.clear();
      for (const auto& s : j.at("processed_snapshots")) {
        processed_snapshots_.insert({s.at(0).get<std::string>(), parse_date(s.at(1).get<std::string>())});
      }
      window_closed_ = j.at("window_closed").get<bool>();
      probes_.restore(j.at("probes"));
      rdap_.limiter().restore(j.at("rate_limiter"));
      metrics_.restore(j.at("metrics").get<std::map<std::string, std::uint64_t>>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptCheckpoint, std::string("pipeline state: ") + e.what());
    }
  }

 private:
  Duration window_length() const {
    return start_of(opts_.window.end) - start_of(opts_.window.start) + std::chrono::hours(24);
  }

  void flush_counters(const IngestCounters& c) {
    metrics_.add("ct_events", c.events);
    if (c.leaf_certs_dropped) metrics_.add("leaf_certs_dropped", c.leaf_certs_dropped);
    if (c.names_dropped) metrics_.add("names_dropped", c.names_dropped);
    if (c.known_domains) metrics_.add("known_domains", c.known_domains);
    if (c.duplicates) metrics_.add("duplicate_candidates", c.duplicates);
    if (c.quarantined) metrics_.add("quarantined", c.quarantined);
  }

  void start_lifecycle(const CandidateNRD& cand) {
    const auto name = cand.domain.full();
    int generation = 0;
    std::optional<Date> previous_removal;
    if (const auto it = active_.find(name); it != active_.end()) {
      merge_probe_facts(it->second);
      generation = it->second.generation + 1;
      previous_removal = it->second.zone_removed_on;
      archived_.push_back(std::move(it->second));
      active_.erase(it);
      probes_.forget(name);
      metrics_.add("reregistrations");
    }
    metrics_.add("candidates");
    auto& lc = active_[name] = DomainLifecycle::from_candidate(cand, generation);
    by_tld_[cand.domain.tld()].insert(name);
    emit(lc, FeedEvent::NrdDetected, cand.first_seen_ct);
    scan_existing_snapshots(lc, previous_removal);
    const Timestamp now = clock_.now();
    rdap_queue_.emplace(std::max(now, cand.first_seen_ct + opts_.fetch_delay), name);
    if (opts_.enroll_on_candidate) probes_.enroll(cand.domain, now);
  }

  /// Replays snapshots that were loaded before the candidate existed.
  void scan_existing_snapshots(DomainLifecycle& lc, std::optional<Date> after) {
    const auto& tld = lc.domain.tld();
    if (!zones_.has_tld(tld)) return;
    const Timestamp now = clock_.now();
    for (const Date d : zones_.dates(tld)) {
      if (!processed_snapshots_.count({tld, d})) continue;
      if (after && d <= *after) continue;
      if (!opts_.window.in_appearance_range(d, lc.first_seen_ct)) continue;
      if (zones_.snapshot(tld, d)->contains(lc.domain.label())) apply(lc, ZoneAppeared{tld, d, now});
    }
    reconcile_removal(lc, now, after);
  }

  /// The removal date is the earliest processed in-range snapshot after the
  /// first appearance that lacks the domain, whatever order snapshots arrive in.
  void reconcile_removal(DomainLifecycle& lc, Timestamp now, std::optional<Date> after = std::nullopt) {
    if (lc.zone_appearances.empty()) return;
    if (lc.state == LifecycleState::Transient || lc.state == LifecycleState::EarlyRemoved) return;
    const auto& tld = lc.domain.tld();
    const Date first = lc.zone_appearances.front().date;
    for (const Date d : zones_.dates(tld)) {
      if (d <= first || (after && d <= *after)) continue;
      if (lc.zone_removed_on && d >= *lc.zone_removed_on) break;
      if (!processed_snapshots_.count({tld, d}) || !opts_.window.in_appearance_range(d, lc.first_seen_ct)) continue;
      if (!zones_.snapshot(tld, d)->contains(lc.domain.label())) {
        apply(lc, ZoneRemoved{tld, d, now});
        break;
      }
    }
  }

  template <typename Fn>
  void drain(std::set<std::pair<Timestamp, std::string>>& q, Timestamp now, Fn&& handle) {
    std::vector<std::pair<Timestamp, std::string>> deferred;
    while (!q.empty() && q.begin()->first <= now) {
      const auto name = q.begin()->second;
      q.erase(q.begin());
      if (const auto later = handle(name)) deferred.emplace_back(*later, name);
    }
    for (auto& e : deferred) q.insert(std::move(e));
  }

  /// Returns a retry time when the endpoint is throttled.
  std::optional<Timestamp> fetch(const std::string& name, Timestamp now) {
    auto it = active_.find(name);
    if (it == active_.end() || it->second.state != LifecycleState::Candidate) return std::nullopt;
    auto& lc = it->second;
    const auto outcome = rdap_.try_fetch(lc.domain);
    if (!outcome) {
      metrics_.add("rdap_throttled");
      return rdap_.next_allowed(lc.domain);
    }
    metrics_.add("rdap_requests");
    if (const auto* rec = std::get_if<RdapRecord>(&*outcome)) {
      apply(lc, RdapOk{*rec, now});
      return std::nullopt;
    }
    const auto& failure = std::get<RdapFailure>(*outcome);
    if (!failure.not_found) {
      apply(lc, RdapFail{failure, now});
      return std::nullopt;
    }
    if (auto refined = classify_failure(lc.domain, failure, zones_, cutoff(lc), std::nullopt)) {
      apply(lc, RdapFail{*refined, now});
      return std::nullopt;
    }
    pending_failures_[name] = failure;
    reprobe_queue_.emplace(now + opts_.reprobe_delay, name);
    return std::nullopt;
  }

  std::optional<Timestamp> reprobe(const std::string& name, Timestamp now) {
    auto it = active_.find(name);
    const auto pf = pending_failures_.find(name);
    if (it == active_.end() || pf == pending_failures_.end() || it->second.state != LifecycleState::Candidate) {
      if (pf != pending_failures_.end()) pending_failures_.erase(pf);
      return std::nullopt;
    }
    auto& lc = it->second;
    const auto outcome = rdap_.try_fetch(lc.domain);
    if (!outcome) {
      metrics_.add("rdap_throttled");
      return rdap_.next_allowed(lc.domain);
    }
    metrics_.add("rdap_requests");
    metrics_.add("rdap_reprobes");
    DelayedProbeEvidence ev;
    if (const auto* rec = std::get_if<RdapRecord>(&*outcome)) {
      ev.refetch_succeeded = true;
      ev.refetch_registration_ts = rec->registration_ts;
      ev.detail = "re-fetch registration " + format_rfc3339(rec->registration_ts);
    }
    const auto ns = probes_.probe_ns_now(lc.domain);
    metrics_.add("probes_sent");
    ev.domain_resolving = is_valid_ns_response(ns);
    if (ev.detail.empty()) ev.detail = "NS " + dns::to_string(ns.rcode) + " from " + ns.queried_server;
    const auto refined = classify_failure(lc.domain, pf->second, zones_, cutoff(lc), ev);
    pending_failures_.erase(pf);
    apply(lc, RdapFail{*refined, now});
    return std::nullopt;
  }

  Date cutoff(const DomainLifecycle& lc) const { return date_of(lc.first_seen_ct - opts_.window.slack); }

  void merge_probe_facts(DomainLifecycle& lc) const {
    if (const auto* s = probes_.summary(lc.domain.full())) {
      lc.last_valid_ns = s->last_valid_ns;
      lc.deletion_inferred_at = s->deletion_inferred_at;
    }
  }

  void apply(DomainLifecycle& lc, const LifecycleEvent& ev) {
    const auto before = lc.transitions.size();
    if (std::holds_alternative<WindowClosed>(ev)) merge_probe_facts(lc);
    lc = apply_event(std::move(lc), ev, opts_.window);
    for (std::size_t i = before; i < lc.transitions.size(); ++i) {
      const auto& t = lc.transitions[i];
      switch (t.to) {
        case LifecycleState::ConfirmedNrd:
          metrics_.add("confirmed");
          emit(lc, FeedEvent::Confirmed, t.at);
          break;
        case LifecycleState::InZone:
          metrics_.add("in_zone");
          emit(lc, FeedEvent::InZone, t.at);
          break;
        case LifecycleState::Transient:
          metrics_.add("transients");
          emit(lc, FeedEvent::Transient, t.at);
          break;
        case LifecycleState::EarlyRemoved:
          metrics_.add("early_removed");
          emit(lc, FeedEvent::EarlyRemoved, t.at);
          seen_.forget(lc.domain.full());
          break;
        case LifecycleState::Misclassified: metrics_.add("misclassified"); break;
        case LifecycleState::RdapFailed:
          metrics_.add("rdap_failures_" + std::string(to_string(lc.rdap_failure->cause)));
          break;
        case LifecycleState::Candidate: break;
      }
    }
  }

  void emit(const DomainLifecycle& lc, FeedEvent event, Timestamp at) {
    FeedRecord rec;
    rec.domain = lc.domain.full();
    rec.event = event;
    rec.at = at;
    if (lc.rdap && event != FeedEvent::NrdDetected) {
      rec.registrar_name = registrar_key(*lc.rdap);
      rec.detection_lag_secs = lc.validation ? lc.validation->lag.count() : (lc.first_seen_ct - lc.rdap->registration_ts).count();
    }
    if (feed_.emit(rec, lc.generation)) metrics_.add("feed_records");
  }

  PipelineOptions opts_;
  const SuffixRuleSet& rules_;
  ZoneStore& zones_;
  RdapClient& rdap_;
  ProbeScheduler& probes_;
  FeedWriter& feed_;
  const Clock& clock_;
  Metrics& metrics_;
  SeenSet seen_;
  std::map<std::string, DomainLifecycle> active_;
  std::vector<DomainLifecycle> archived_;
  std::map<std::string, std::set<std::string>> by_tld_;
  std::set<std::pair<Timestamp, std::string>> rdap_queue_;
  std::set<std::pair<Timestamp, std::string>> reprobe_queue_;
  std::map<std::string, RdapFailure> pending_failures_;
  std::set<std::pair<std::string, Date>> processed_snapshots_;
  bool window_closed_ = false;
};

}  // namespace darkdns
