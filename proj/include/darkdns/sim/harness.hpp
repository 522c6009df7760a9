#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "darkdns/blocklist.hpp"
#include "darkdns/checkpoint.hpp"
#include "darkdns/classifier.hpp"
#include "darkdns/clock.hpp"
#include "darkdns/ct_ingest.hpp"
#include "darkdns/dns/resolver.hpp"
#include "darkdns/dns/transport.hpp"
#include "darkdns/feed.hpp"
#include "darkdns/metrics.hpp"
#include "darkdns/pipeline.hpp"
#include "darkdns/probe.hpp"
#include "darkdns/rate_limiter.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/sim/ground_truth.hpp"
#include "darkdns/sim/mock_dns.hpp"
#include "darkdns/sim/mock_rdap.hpp"
#include "darkdns/sim/scenario.hpp"
#include "darkdns/zone_store.hpp"

namespace darkdns::sim {

enum class MockTransport {
  /// Wire-format messages handed to the mock handlers in process.
  InProcess,
  /// Real UDP/TCP DNS and HTTP servers on loopback.
  Loopback,
};

struct HarnessOptions {
  MockTransport transport = MockTransport::InProcess;
  std::size_t probe_workers = 1;
  double rdap_rate_per_min = 10.0;
  /// Feed files go here; an in-memory sink is used when unset.
  std::optional<std::filesystem::path> feed_dir;
  /// Needed for checkpoints.
  std::optional<std::filesystem::path> state_dir;
  /// Checkpoint after every N certificate events (0 = never).
  std::size_t checkpoint_every = 0;
  /// Drop all in-memory state after this many certificate events and resume
  /// from the last checkpoint.
  std::optional<std::size_t> crash_after_events;
};

struct DomainComparison {
  std::string domain;
  std::string expected_state;
  std::string actual_state;
  std::string expected_cause;
  std::string actual_cause;
  std::optional<std::int64_t> expected_lag_secs;
  std::optional<std::int64_t> actual_lag_secs;
  std::optional<std::int64_t> expected_lifetime_secs;
  std::optional<std::int64_t> actual_lifetime_secs;
  std::optional<std::int64_t> scripted_lifetime_secs;
  std::string expected_flag;
  std::string actual_flag;

  bool state_match() const { return expected_state == actual_state && expected_cause == actual_cause; }
  bool lag_match() const { return expected_lag_secs == actual_lag_secs; }
  bool lifetime_match() const { return expected_lifetime_secs == actual_lifetime_secs; }
  bool flag_match() const { return expected_flag == actual_flag; }
  bool all_match() const { return state_match() && lag_match() && lifetime_match() && flag_match(); }
};

struct ProbeContract {
  std::size_t enrolled = 0;
  /// Enrolled domains whose round or query count differs from the schedule.
  std::size_t off_schedule = 0;
  int expected_rounds = 0;
  std::uint64_t expected_queries_per_domain = 0;
  /// NS queries seen anywhere other than the owning TLD authority.
  std::uint64_t misdirected_ns = 0;
  /// Authority-side NS hit counts that disagree with what the scheduler sent.
  std::size_t ns_hit_mismatches = 0;
  std::uint64_t cache_hits = 0;
  std::int64_t max_cached_age_secs = 0;
};

struct RdapContract {
  std::uint64_t requests = 0;
  /// Domains whose request count is not 1 (or 2 when a re-probe was due).
  std::size_t unexpected_request_counts = 0;
  std::uint64_t max_per_minute = 0;
  std::uint64_t throttled = 0;
};

struct EndToEndReport {
  std::uint64_t seed = 0;
  std::vector<DomainComparison> domains;
  std::map<std::string, std::size_t> expected_counts;
  std::map<std::string, std::size_t> actual_counts;
  std::vector<std::string> detected_transients;
  std::vector<std::string> expected_transients;
  ProbeContract probes;
  RdapContract rdap;
  std::vector<std::string> feed_lines;
  std::size_t duplicate_feed_records = 0;
  std::size_t restarts = 0;
  std::map<std::string, std::uint64_t> metrics;
  std::vector<DomainLifecycle> lifecycles;

  std::size_t state_matches() const {
    return static_cast<std::size_t>(std::count_if(domains.begin(), domains.end(), [](const auto& d) { return d.state_match(); }));
  }
  double state_agreement() const {
    return domains.empty() ? 1.0 : static_cast<double>(state_matches()) / static_cast<double>(domains.size());
  }
  std::vector<const DomainComparison*> mismatches() const {
    std::vector<const DomainComparison*> out;
    for (const auto& d : domains) {
      if (!d.all_match()) out.push_back(&d);
    }
    return out;
  }
  bool transients_subset() const {
    return std::includes(expected_transients.begin(), expected_transients.end(), detected_transients.begin(),
                         detected_transients.end());
  }
  bool transients_equal() const { return detected_transients == expected_transients; }

  nlohmann::ordered_json to_json() const;
  std::string summary() const;
};

namespace detail {

inline std::string state_name(const std::optional<LifecycleState>& s) {
  return s ? std::string(to_string(*s)) : std::string("NOT_DETECTED");
}

inline nlohmann::ordered_json opt_json(const std::optional<std::int64_t>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace detail

inline nlohmann::ordered_json EndToEndReport::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["domains_compared"] = domains.size();
  j["state_matches"] = state_matches();
  j["state_agreement"] = state_agreement();
  j["expected_counts"] = expected_counts;
  j["actual_counts"] = actual_counts;
  j["transients"] = {{"expected", expected_transients.size()},
                     {"detected", detected_transients.size()},
                     {"subset", transients_subset()},
                     {"equal", transients_equal()}};
  j["probe_contract"] = {{"enrolled", probes.enrolled},
                         {"expected_rounds", probes.expected_rounds},
                         {"expected_queries_per_domain", probes.expected_queries_per_domain},
                         {"off_schedule", probes.off_schedule},
                         {"misdirected_ns", probes.misdirected_ns},
                         {"ns_hit_mismatches", probes.ns_hit_mismatches},
                         {"cache_hits", probes.cache_hits},
                         {"max_cached_age_secs", probes.max_cached_age_secs}};
  j["rdap_contract"] = {{"requests", rdap.requests},
                        {"unexpected_request_counts", rdap.unexpected_request_counts},
                        {"max_per_minute", rdap.max_per_minute},
                        {"throttled", rdap.throttled}};
  j["feed_records"] = feed_lines.size();
  j["duplicate_feed_records"] = duplicate_feed_records;
  j["restarts"] = restarts;
  nlohmann::ordered_json mism = nlohmann::ordered_json::array();
  for (const auto* d : mismatches()) {
    mism.push_back({{"domain", d->domain},
                    {"expected_state", d->expected_state},
                    {"actual_state", d->actual_state},
                    {"expected_cause", d->expected_cause},
                    {"actual_cause", d->actual_cause},
                    {"expected_lag_secs", detail::opt_json(d->expected_lag_secs)},
                    {"actual_lag_secs", detail::opt_json(d->actual_lag_secs)},
                    {"expected_lifetime_secs", detail::opt_json(d->expected_lifetime_secs)},
                    {"actual_lifetime_secs", detail::opt_json(d->actual_lifetime_secs)},
                    {"expected_flag", d->expected_flag},
                    {"actual_flag", d->actual_flag}});
  }
  j["mismatches"] = mism;
  j["metrics"] = metrics;
  return j;
}

inline std::string EndToEndReport::summary() const {
  std::ostringstream os;
  os << "seed " << seed << ": " << state_matches() << "/" << domains.size() << " lifecycle states match ground truth\n";
  os << "  expected:";
  for (const auto& [k, v] : expected_counts) os << ' ' << k << '=' << v;
  os << "\n  actual:  ";
  for (const auto& [k, v] : actual_counts) os << ' ' << k << '=' << v;
  os << "\n  transients: " << detected_transients.size() << " detected, " << expected_transients.size() << " expected ("
     << (transients_equal() ? "equal" : transients_subset() ? "subset" : "NOT a subset") << ")\n";
  os << "  probes: " << probes.enrolled << " domains enrolled, " << probes.off_schedule << " off schedule, "
     << probes.misdirected_ns << " misdirected NS queries, max cached age " << probes.max_cached_age_secs << "s\n";
  os << "  rdap: " << rdap.requests << " requests, max " << rdap.max_per_minute << "/min per endpoint, "
     << rdap.unexpected_request_counts << " domains with unexpected request counts\n";
  os << "  feed: " << feed_lines.size() << " records, " << duplicate_feed_records << " duplicates, " << restarts
     << " restarts\n";
  const auto mism = mismatches();
  os << "  mismatches: " << mism.size() << "\n";
  for (std::size_t i = 0; i < mism.size() && i < 20; ++i) {
    const auto* d = mism[i];
    os << "    " << d->domain << " expected " << d->expected_state;
    if (!d->expected_cause.empty()) os << "/" << d->expected_cause;
    os << " got " << d->actual_state;
    if (!d->actual_cause.empty()) os << "/" << d->actual_cause;
    if (!d->lifetime_match()) os << " (lifetime differs)";
    if (!d->lag_match()) os << " (lag differs)";
    if (!d->flag_match()) os << " (flag timing differs)";
    os << "\n";
  }
  return os.str();
}

inline CertEvent to_cert_event(const ScriptedCert& c) {
  CertEvent ev;
  ev.seen_at = c.at;
  ev.entry_kind = c.precert ? EntryKind::Precert : EntryKind::LeafCert;
  ev.names = c.names;
  ev.log_id = c.log;
  return ev;
}

/// The certificate stream as certstream-style NDJSON.
inline std::string cert_stream_ndjson(const Scenario& sc) {
  std::string out;
  for (const auto& c : sc.certs) out += cert_event_to_json_line(to_cert_event(c)) + "\n";
  return out;
}

/// Labels present in a TLD snapshot for one date.
inline std::vector<std::string> snapshot_labels(const Scenario& sc, const std::string& tld, Date date) {
  std::vector<std::string> labels;
  for (const auto& t : sc.domains) {
    if (t.tld() == tld && t.in_snapshot(date)) labels.push_back(t.label());
  }
  return labels;
}

inline BlocklistStore scenario_blocklists(const Scenario& sc) {
  std::map<std::pair<std::string, Date>, BlocklistSnapshot> snaps;
  for (const auto& t : sc.domains) {
    for (const auto& f : t.blocklist_flags) {
      auto& s = snaps[{f.list, f.date}];
      s.list_name = f.list;
      s.snapshot_date = f.date;
      s.domains.insert(t.name);
    }
  }
  BlocklistStore store;
  for (const auto& [k, s] : snaps) store.add(s);
  return store;
}

/// Runs the full pipeline against mock services under a virtual clock.
class SimHarness {
 public:
  SimHarness(const Scenario& scenario, HarnessOptions opts = {})
      : sc_(scenario), opts_(std::move(opts)), world_(sc_), rules_(make_rules(sc_)) {
    if ((opts_.checkpoint_every || opts_.crash_after_events) && !opts_.state_dir) {
      throw Error(ErrorCode::InvalidParams, "checkpoints need a state directory");
    }
    if (opts_.feed_dir) {
      file_sink_ = std::make_unique<RotatingFileSink>(*opts_.feed_dir, false);
    }
  }

  EndToEndReport run() {
    build_stack(sc_.start_at);
    std::size_t events = 0;
    bool crashed = false;
    while (true) {
      std::optional<Timestamp> t = stack_->pipeline->next_due();
      auto consider = [&](Timestamp x) {
        if (!t || x < *t) t = x;
      };
      if (snap_cursor_ < sc_.snapshots.size()) consider(sc_.snapshots[snap_cursor_].published_at);
      if (cert_cursor_ < sc_.certs.size()) consider(sc_.certs[cert_cursor_].at);
      if (!t || *t > sc_.close_at) break;
      stack_->clock.set(std::max(*t, stack_->clock.now()));
      const Timestamp now = stack_->clock.now();
      while (snap_cursor_ < sc_.snapshots.size() && sc_.snapshots[snap_cursor_].published_at <= now) {
        const auto& s = sc_.snapshots[snap_cursor_++];
        stack_->zones.add_snapshot(s.tld, s.date, snapshot_labels(sc_, s.tld, s.date), now);
        stack_->pipeline->on_snapshot(s.tld, s.date);
      }
      bool restart = false;
      while (cert_cursor_ < sc_.certs.size() && sc_.certs[cert_cursor_].at <= now) {
        const auto line = cert_event_to_json_line(to_cert_event(sc_.certs[cert_cursor_++]));
        try {
          stack_->pipeline->on_cert_event(parse_cert_event(line));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MalformedEvent) throw;
          stack_->pipeline->on_malformed_event();
        }
        ++events;
        if (opts_.checkpoint_every && events % opts_.checkpoint_every == 0) save_checkpoint();
        if (!crashed && opts_.crash_after_events && events == *opts_.crash_after_events) {
          crashed = restart = true;
          break;
        }
      }
      if (restart) {
        resume_from_checkpoint();
        continue;
      }
      stack_->pipeline->run_due();
    }
    stack_->clock.set(std::max(sc_.close_at, stack_->clock.now()));
    stack_->pipeline->run_due();
    stack_->pipeline->close_window();
    return build_report();
  }

  /// Ground truth for the scenario, computed on first use.
  const GroundTruth& ground_truth() {
    if (!truth_) truth_ = derive_ground_truth(sc_);
    return *truth_;
  }

 private:
  struct Stack {
    VirtualClock clock;
    std::unique_ptr<MockRdapService> rdap_service;
    std::unique_ptr<MockRdapServer> rdap_server;
    std::unique_ptr<HttpTransport> http;
    std::vector<std::unique_ptr<MockAuthoritative>> authorities;
    std::unique_ptr<MockRecursive> recursive_mock;
    std::vector<std::unique_ptr<dns::DnsSocketServer>> dns_servers;
    std::unique_ptr<dns::DnsTransport> dns_transport;
    dns::QueryIdSource ids;
    std::unique_ptr<dns::StubResolver> stub;
    std::unique_ptr<dns::CachingResolver> cache;
    ZoneStore zones;
    EndpointRateLimiter limiter;
    std::unique_ptr<RdapClient> rdap;
    std::unique_ptr<ProbeScheduler> probes;
    std::unique_ptr<FeedWriter> feed;
    Metrics metrics;
    std::unique_ptr<Pipeline> pipeline;

    Stack(Timestamp start, std::uint64_t seed, double rate) : clock(start), ids(seed), limiter(rate, 1.0) {}
  };

  static SuffixRuleSet make_rules(const Scenario& sc) { return SuffixRuleSet::from_rules(sc.params.tlds); }

  FeedSink& sink() { return file_sink_ ? static_cast<FeedSink&>(*file_sink_) : memory_sink_; }

  std::vector<std::string> feed_lines() const {
    return file_sink_ ? read_feed_lines(file_sink_->directory()) : memory_sink_.lines();
  }

  void build_stack(Timestamp start) {
    stack_.reset();
    stack_ = std::make_unique<Stack>(start, sc_.seed ^ 0x5eedULL, opts_.rdap_rate_per_min);
    auto& s = *stack_;
    s.rdap_service = std::make_unique<MockRdapService>(world_, s.clock);
    RdapBootstrap bootstrap;
    TldAuthorityMap authorities;
    dns::Endpoint recursive_ep;
    for (const auto& tld : sc_.params.tlds) {
      s.authorities.push_back(std::make_unique<MockAuthoritative>(world_, s.clock, tld));
    }
    s.recursive_mock = std::make_unique<MockRecursive>(world_, s.clock);
    if (opts_.transport == MockTransport::InProcess) {
      auto inproc = std::make_unique<dns::InProcessDnsTransport>();
      for (std::size_t i = 0; i < s.authorities.size(); ++i) {
        const dns::Endpoint ep{"10.53.0." + std::to_string(i + 1), 53};
        inproc->attach(ep, *s.authorities[i]);
        authorities.add(s.authorities[i]->tld(), ep);
      }
      recursive_ep = dns::Endpoint{"10.53.1.1", 53};
      inproc->attach(recursive_ep, *s.recursive_mock);
      s.dns_transport = std::move(inproc);
      s.http = std::make_unique<InProcessHttpTransport>(*s.rdap_service);
      for (const auto& tld : sc_.params.tlds) bootstrap.add(tld, "http://rdap.sim.invalid/" + tld + "/");
    } else {
      for (auto& a : s.authorities) {
        s.dns_servers.push_back(std::make_unique<dns::DnsSocketServer>(*a));
        authorities.add(a->tld(), s.dns_servers.back()->endpoint());
      }
      s.dns_servers.push_back(std::make_unique<dns::DnsSocketServer>(*s.recursive_mock));
      recursive_ep = s.dns_servers.back()->endpoint();
      s.dns_transport = std::make_unique<dns::UdpDnsTransport>();
      s.rdap_server = std::make_unique<MockRdapServer>(*s.rdap_service);
      s.http = std::make_unique<HttplibTransport>(std::chrono::seconds(5));
      for (const auto& tld : sc_.params.tlds) bootstrap.add(tld, s.rdap_server->base_url(tld));
    }
    s.stub = std::make_unique<dns::StubResolver>(*s.dns_transport, recursive_ep, std::chrono::milliseconds(2000), s.ids);
    s.cache = std::make_unique<dns::CachingResolver>(*s.stub, s.clock);
    s.rdap = std::make_unique<RdapClient>(bootstrap, *s.http, s.limiter, s.clock);
    ProbeConfig pc;
    pc.interval = sc_.probe_interval();
    pc.horizon = sc_.probe_horizon();
    pc.workers = opts_.probe_workers;
    pc.timeout = std::chrono::milliseconds(2000);
    s.probes = std::make_unique<ProbeScheduler>(pc, s.clock, *s.cache, *s.dns_transport, authorities, s.ids);
    s.feed = std::make_unique<FeedWriter>(sink(), [](std::chrono::milliseconds) {});
    s.feed->rebuild(feed_lines());
    PipelineOptions po;
    po.window = sc_.window;
    po.fetch_delay = sc_.fetch_delay();
    po.reprobe_delay = sc_.reprobe_delay();
    s.pipeline = std::make_unique<Pipeline>(po, rules_, s.zones, *s.rdap, *s.probes, *s.feed, s.clock, s.metrics);
  }

  void save_checkpoint() {
    nlohmann::json j;
    j["pipeline"] = stack_->pipeline->checkpoint();
    j["cert_cursor"] = cert_cursor_;
    j["snapshot_cursor"] = snap_cursor_;
    j["now"] = to_epoch(stack_->clock.now());
    StateStore(*opts_.state_dir).save(j);
  }

  void resume_from_checkpoint() {
    ++restarts_;
    const auto state = StateStore(*opts_.state_dir).load();
    if (!state) {
      cert_cursor_ = snap_cursor_ = 0;
      build_stack(sc_.start_at);
      return;
    }
    build_stack(from_epoch(state->at("now").get<std::int64_t>()));
    snap_cursor_ = state->at("snapshot_cursor").get<std::size_t>();
    cert_cursor_ = state->at("cert_cursor").get<std::size_t>();
    for (std::size_t i = 0; i < snap_cursor_; ++i) {
      const auto& s = sc_.snapshots[i];
      stack_->zones.add_snapshot(s.tld, s.date, snapshot_labels(sc_, s.tld, s.date), s.published_at);
    }
    stack_->pipeline->restore(state->at("pipeline"));
  }

  EndToEndReport build_report() {
    auto& s = *stack_;
    const auto& gt = ground_truth();
    EndToEndReport rep;
    rep.seed = sc_.seed;
    rep.restarts = restarts_;
    rep.lifecycles = s.pipeline->lifecycles();
    std::map<std::string, const DomainLifecycle*> latest;
    for (const auto& lc : rep.lifecycles) latest[lc.domain.full()] = &lc;

    const auto blocklists = scenario_blocklists(sc_);
    std::map<std::string, FlagCategory> actual_flags;
    for (const auto& row : correlate(rep.lifecycles, blocklists).rows) actual_flags[row.domain.full()] = row.category;

    for (const auto& [name, e] : gt.domains) {
      DomainComparison c;
      c.domain = name;
      c.expected_state = detail::state_name(e.state);
      if (e.cause) c.expected_cause = std::string(to_string(*e.cause));
      if (e.detection_lag) c.expected_lag_secs = e.detection_lag->count();
      if (e.state == LifecycleState::Transient && e.lifetime) c.expected_lifetime_secs = e.lifetime->count();
      if (e.scripted_lifetime) c.scripted_lifetime_secs = e.scripted_lifetime->count();
      if (e.flag_category) c.expected_flag = std::string(to_string(*e.flag_category));
      const auto it = latest.find(name);
      if (it != latest.end()) {
        const auto& lc = *it->second;
        c.actual_state = std::string(to_string(lc.state));
        if (lc.rdap_failure) c.actual_cause = std::string(to_string(lc.rdap_failure->cause));
        if (lc.validation && lc.validation->verdict == Verdict::Confirmed) c.actual_lag_secs = lc.validation->lag.count();
        if (lc.state == LifecycleState::Transient && lc.rdap && lc.last_valid_ns) {
          c.actual_lifetime_secs = lifetime(lc).count();
        }
      } else {
        c.actual_state = detail::state_name(std::nullopt);
      }
      if (const auto f = actual_flags.find(name); f != actual_flags.end()) c.actual_flag = std::string(to_string(f->second));
      ++rep.expected_counts[c.expected_state];
      ++rep.actual_counts[c.actual_state];
      rep.domains.push_back(std::move(c));
    }
    for (const auto& d : finalize_transients(rep.lifecycles, sc_.window)) rep.detected_transients.push_back(d.full());
    std::sort(rep.detected_transients.begin(), rep.detected_transients.end());
    for (const auto& [name, e] : gt.domains) {
      if (e.state == LifecycleState::Transient) rep.expected_transients.push_back(name);
    }

    // Probe contract.
    auto& pc = rep.probes;
    pc.expected_rounds = static_cast<int>(sc_.probe_horizon() / sc_.probe_interval());
    pc.expected_queries_per_domain = static_cast<std::uint64_t>(pc.expected_rounds) * 3;
    pc.misdirected_ns = s.recursive_mock->ns_queries();
    for (const auto& a : s.authorities) pc.misdirected_ns += a->refused();
    pc.cache_hits = s.cache->hits();
    pc.max_cached_age_secs = s.cache->max_served_age().count();
    std::map<std::string, std::uint64_t> auth_ns;
    for (const auto& a : s.authorities) {
      for (const auto& [n, v] : a->hits().per_name(dns::type::NS)) auth_ns[n] += v;
    }
    const auto rdap_hits = s.rdap_service->all_hits();
    for (const auto& [name, lc] : latest) {
      const auto* sum = s.probes->summary(name);
      if (!sum) continue;
      ++pc.enrolled;
      if (sum->rounds != pc.expected_rounds || sum->queries != pc.expected_queries_per_domain) ++pc.off_schedule;
      const auto rh = rdap_hits.count(name) ? rdap_hits.at(name) : 0;
      const std::uint64_t adhoc = rh > 1 ? rh - 1 : 0;
      if (restarts_ == 0 && auth_ns[name] != static_cast<std::uint64_t>(sum->rounds) + adhoc) ++pc.ns_hit_mismatches;
    }

    // RDAP contract: one fetch per candidate, plus one re-probe for unresolved not-found answers.
    rep.rdap.requests = s.rdap_service->total();
    rep.rdap.max_per_minute = s.rdap_service->max_requests_in(std::chrono::seconds(60));
    rep.rdap.throttled = s.metrics.get("rdap_throttled");
    if (restarts_ == 0) {
      for (const auto& [name, lc] : latest) {
        const auto rh = rdap_hits.count(name) ? rdap_hits.at(name) : 0;
        const bool reprobed = lc->rdap_failure && (lc->rdap_failure->cause == RdapFailureCause::TooLate ||
                                                   lc->rdap_failure->cause == RdapFailureCause::NotYetSynced);
        if (rh != (reprobed ? 2u : 1u)) ++rep.rdap.unexpected_request_counts;
      }
    }

    rep.feed_lines = feed_lines();
    std::set<std::string> unique(rep.feed_lines.begin(), rep.feed_lines.end());
    rep.duplicate_feed_records = rep.feed_lines.size() - unique.size();
    rep.metrics = s.metrics.snapshot();
    return rep;
  }

  const Scenario& sc_;
  HarnessOptions opts_;
  World world_;
  SuffixRuleSet rules_;
  std::unique_ptr<RotatingFileSink> file_sink_;
  MemorySink memory_sink_;
  std::unique_ptr<Stack> stack_;
  std::optional<GroundTruth> truth_;
  std::size_t cert_cursor_ = 0;
  std::size_t snap_cursor_ = 0;
  std::size_t restarts_ = 0;
};

inline EndToEndReport run_end_to_end(const Scenario& sc, HarnessOptions opts = {}) {
  SimHarness h(sc, std::move(opts));
  return h.run();
}

}  // namespace darkdns::sim
