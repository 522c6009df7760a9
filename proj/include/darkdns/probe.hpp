#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "darkdns/clock.hpp"
#include "darkdns/dns/resolver.hpp"
#include "darkdns/dns/transport.hpp"
#include "darkdns/error.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"
#include "darkdns/worker_pool.hpp"

namespace darkdns {

using dns::ProbeRcode;

enum class ProbePath { Recursive, TldAuthoritative };

inline std::string to_string(ProbePath p) { return p == ProbePath::Recursive ? "RECURSIVE" : "TLD_AUTHORITATIVE"; }

struct ProbeResult {
  RegistrableDomain domain;
  int round = 0;
  std::uint16_t qtype = dns::type::A;
  ProbePath path = ProbePath::Recursive;
  ProbeRcode rcode = ProbeRcode::Timeout;
  /// Addresses for A/AAAA; nameserver hostnames for NS (from the answer or the referral).
  std::vector<std::string> answers;
  bool authority_referral = false;
  std::string queried_server;
  Timestamp at;
};

inline std::string to_json_line(const ProbeResult& r) {
  nlohmann::ordered_json j;
  j["domain"] = r.domain.full();
  j["round"] = r.round;
  j["qtype"] = dns::qtype_name(r.qtype);
  j["path"] = to_string(r.path);
  j["rcode"] = dns::to_string(r.rcode);
  j["answers"] = r.answers;
  j["authority_referral"] = r.authority_referral;
  j["queried_server"] = r.queried_server;
  j["at"] = format_rfc3339(r.at);
  return j.dump();
}

inline ProbeResult probe_result_from_json(const nlohmann::json& j) {
  ProbeResult r;
  r.domain = registrable_from_full(j.at("domain").get<std::string>());
  r.round = j.at("round").get<int>();
  r.qtype = dns::qtype_from_name(j.at("qtype").get<std::string>());
  r.path = j.at("path").get<std::string>() == "RECURSIVE" ? ProbePath::Recursive : ProbePath::TldAuthoritative;
  r.rcode = dns::probe_rcode_from_string(j.at("rcode").get<std::string>());
  r.answers = j.at("answers").get<std::vector<std::string>>();
  r.authority_referral = j.at("authority_referral").get<bool>();
  r.queried_server = j.at("queried_server").get<std::string>();
  r.at = parse_rfc3339(j.at("at").get<std::string>());
  return r;
}

struct NsChangeEvent {
  RegistrableDomain domain;
  int round = 0;
  std::set<std::string> old_ns_set;
  std::set<std::string> new_ns_set;
  Timestamp at;
};

// ---------------------------------------------------------------------------
// History analysis

inline bool is_valid_ns_response(const ProbeResult& r) {
  return r.qtype == dns::type::NS && r.path == ProbePath::TldAuthoritative && r.rcode == ProbeRcode::NoError &&
         (r.authority_referral || !r.answers.empty());
}

inline std::set<std::string> ns_set_of(const ProbeResult& r) {
  std::set<std::string> out;
  for (const auto& a : r.answers) {
    std::string n = a;
    std::transform(n.begin(), n.end(), n.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!n.empty() && n.back() == '.') n.pop_back();
    out.insert(std::move(n));
  }
  return out;
}

/// One event per consecutive pair of NOERROR NS results whose sets differ.
inline std::vector<NsChangeEvent> detect_ns_change(const std::vector<ProbeResult>& history) {
  std::vector<NsChangeEvent> out;
  std::optional<std::set<std::string>> prev;
  for (const auto& r : history) {
    if (r.qtype != dns::type::NS || r.path != ProbePath::TldAuthoritative || r.rcode != ProbeRcode::NoError) continue;
    auto cur = ns_set_of(r);
    if (prev && *prev != cur) out.push_back(NsChangeEvent{r.domain, r.round, *prev, cur, r.at});
    prev = std::move(cur);
  }
  return out;
}

inline std::optional<Timestamp> last_valid_ns_response(const std::vector<ProbeResult>& history) {
  std::optional<Timestamp> out;
  for (const auto& r : history) {
    if (is_valid_ns_response(r) && (!out || r.at > *out)) out = r.at;
  }
  return out;
}

/// First TLD-authoritative NXDOMAIN that follows a valid NS response.
inline std::optional<Timestamp> deletion_inferred_at(const std::vector<ProbeResult>& history) {
  bool seen_valid = false;
  for (const auto& r : history) {
    if (r.qtype != dns::type::NS || r.path != ProbePath::TldAuthoritative) continue;
    if (is_valid_ns_response(r)) seen_valid = true;
    else if (seen_valid && r.rcode == ProbeRcode::NxDomain) return r.at;
  }
  return std::nullopt;
}

/// Incremental form of the history functions above, so long runs need not
/// retain every result.
struct ProbeSummary {
  int rounds = 0;
  std::uint64_t queries = 0;
  std::optional<Timestamp> first_valid_ns;
  std::optional<Timestamp> last_valid_ns;
  std::optional<Timestamp> deletion_inferred_at;
  std::optional<std::set<std::string>> last_ns_set;
  std::optional<ProbeRcode> last_ns_rcode;
  std::vector<NsChangeEvent> ns_changes;

  void add(const ProbeResult& r) {
    ++queries;
    if (r.qtype != dns::type::NS || r.path != ProbePath::TldAuthoritative) return;
    last_ns_rcode = r.rcode;
    if (is_valid_ns_response(r)) {
      if (!first_valid_ns) first_valid_ns = r.at;
      if (!last_valid_ns || r.at > *last_valid_ns) last_valid_ns = r.at;
    } else if (first_valid_ns && !deletion_inferred_at && r.rcode == ProbeRcode::NxDomain) {
      deletion_inferred_at = r.at;
    }
    if (r.rcode == ProbeRcode::NoError) {
      auto cur = ns_set_of(r);
      if (last_ns_set && *last_ns_set != cur) ns_changes.push_back(NsChangeEvent{r.domain, r.round, *last_ns_set, cur, r.at});
      last_ns_set = std::move(cur);
    }
  }
};

// ---------------------------------------------------------------------------
// Scheduling

struct ProbePlan {
  RegistrableDomain domain;
  Timestamp t0;
  Duration interval = std::chrono::minutes(10);
  Duration horizon = std::chrono::hours(48);
  Timestamp next_due;
  /// Schedule origin; moves only when overdue rounds are coalesced.
  Timestamp anchor;
  int anchor_round = 0;
  int next_round = 0;
  int catch_ups = 0;

  int scheduled_rounds() const { return static_cast<int>(horizon / interval); }
  Timestamp end() const { return t0 + horizon; }
  Timestamp due_of(int round) const { return anchor + (round - anchor_round) * interval; }
  bool finished() const { return next_due >= end(); }
};

/// Enrolment-time probe configuration.
struct ProbeConfig {
  Duration interval = std::chrono::minutes(10);
  Duration horizon = std::chrono::hours(48);
  std::size_t workers = 16;
  std::chrono::milliseconds timeout{5000};
};

/// TLD -> authoritative server addresses, used round-robin.
class TldAuthorityMap {
 public:
  TldAuthorityMap() = default;
  TldAuthorityMap(const TldAuthorityMap& o) : servers_(o.servers_) {}
  TldAuthorityMap& operator=(const TldAuthorityMap& o) {
    servers_ = o.servers_;
    return *this;
  }

  static TldAuthorityMap parse(std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ParseError, "TLD authority map must be a JSON object");
    TldAuthorityMap m;
    for (const auto& [tld, addrs] : j.items()) {
      if (!addrs.is_array() || addrs.empty()) throw Error(ErrorCode::ParseError, "no servers listed for " + tld);
      for (const auto& a : addrs) m.add(tld, dns::Endpoint::parse(a.get<std::string>()));
    }
    return m;
  }

  static TldAuthorityMap load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open TLD authority map " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void add(const std::string& tld, dns::Endpoint ep) { servers_[tld].push_back(std::move(ep)); }

  bool has(const std::string& tld) const { return servers_.count(tld) > 0; }

  const std::vector<dns::Endpoint>& servers(const std::string& tld) const {
    const auto it = servers_.find(tld);
    if (it == servers_.end()) throw Error(ErrorCode::UnknownTld, "no authoritative server configured for ." + tld);
    return it->second;
  }

  dns::Endpoint next(const std::string& tld) const {
    const auto& list = servers(tld);
    std::lock_guard lock(mu_);
    return list[cursor_[tld]++ % list.size()];
  }

  std::string to_json_text() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [tld, list] : servers_) {
      for (const auto& ep : list) j[tld].push_back(ep.to_string());
    }
    return j.dump(2);
  }

 private:
  std::map<std::string, std::vector<dns::Endpoint>> servers_;
  mutable std::mutex mu_;
  mutable std::map<std::string, std::size_t> cursor_;
};

using ProbeResultSink = std::function<void(const ProbeResult&)>;

/// Owns the due-queue; rounds that are due together run on the worker pool and
/// their results are applied in domain order.
class ProbeScheduler {
 public:
  ProbeScheduler(ProbeConfig cfg, const Clock& clock, dns::RecursiveResolver& recursive, dns::DnsTransport& auth,
                 TldAuthorityMap authorities, dns::QueryIdSource& ids)
      : cfg_(cfg),
        clock_(clock),
        recursive_(recursive),
        auth_(auth),
        authorities_(std::move(authorities)),
        ids_(ids),
        pool_(cfg.workers) {
    if (cfg_.interval <= Duration{0} || cfg_.horizon < cfg_.interval) {
      throw Error(ErrorCode::ConfigError, "probe interval must be positive and not exceed the horizon");
    }
  }

  void set_sink(ProbeResultSink sink) { sink_ = std::move(sink); }
  void keep_history(bool on) { keep_history_ = on; }

  const ProbePlan& enroll(const RegistrableDomain& domain, Timestamp t0) {
    const auto key = domain.full();
    if (plans_.count(key) || summaries_.count(key)) {
      throw Error(ErrorCode::AlreadyEnrolled, key + " is already enrolled");
    }
    ProbePlan p;
    p.domain = domain;
    p.t0 = t0;
    p.interval = cfg_.interval;
    p.horizon = cfg_.horizon;
    p.anchor = t0;
    p.next_due = t0;
    summaries_[key];
    auto& slot = plans_[key] = p;
    queue_.emplace(p.next_due, key);
    return slot;
  }

  bool enrolled(const std::string& domain) const { return summaries_.count(domain) > 0; }
  bool active(const std::string& domain) const { return plans_.count(domain) > 0; }
  std::size_t active_count() const { return plans_.size(); }

  std::optional<Timestamp> next_due() const {
    if (queue_.empty()) return std::nullopt;
    return queue_.begin()->first;
  }

  /// Executes one round (A, AAAA, NS) for a plan and advances it. Does not
  /// touch the due-queue.
  std::vector<ProbeResult> execute_round(ProbePlan& plan) {
    const Timestamp now = clock_.now();
    const int round = plan.next_round;
    std::vector<ProbeResult> out;
    out.reserve(3);
    for (const std::uint16_t qt : {dns::type::A, dns::type::AAAA}) out.push_back(query_recursive(plan.domain, qt, round, now));
    out.push_back(query_authoritative(plan.domain, round, now));
    advance(plan, now);
    return out;
  }

  /// Runs every round that is due at the current clock time.
  std::vector<ProbeResult> run_due() {
    const Timestamp now = clock_.now();
    std::vector<std::string> due;
    while (!queue_.empty() && queue_.begin()->first <= now) {
      due.push_back(queue_.begin()->second);
      queue_.erase(queue_.begin());
    }
    std::sort(due.begin(), due.end());
    std::vector<std::vector<ProbeResult>> batches(due.size());
    std::vector<ProbePlan*> plans(due.size());
    for (std::size_t i = 0; i < due.size(); ++i) plans[i] = &plans_.at(due[i]);
    pool_.parallel_for(due.size(), [&](std::size_t i) { batches[i] = execute_round(*plans[i]); });
    std::vector<ProbeResult> all;
    all.reserve(due.size() * 3);
    for (std::size_t i = 0; i < due.size(); ++i) {
      auto& summary = summaries_[due[i]];
      ++summary.rounds;
      ++rounds_total_;
      for (auto& r : batches[i]) {
        summary.add(r);
        if (keep_history_) history_[due[i]].push_back(r);
        if (sink_) sink_(r);
        all.push_back(std::move(r));
      }
      if (plans[i]->finished()) {
        plans_.erase(due[i]);
      } else {
        queue_.emplace(plans[i]->next_due, due[i]);
      }
    }
    return all;
  }

  /// Ad-hoc NS query to the TLD authority outside the round schedule.
  ProbeResult probe_ns_now(const RegistrableDomain& domain) { return query_authoritative(domain, -1, clock_.now()); }

  /// Stops future rounds for a domain; the summary is kept.
  void retire(const std::string& domain) {
    const auto it = plans_.find(domain);
    if (it == plans_.end()) return;
    queue_.erase({it->second.next_due, domain});
    plans_.erase(it);
  }

  /// Drops every trace of a domain so it can be enrolled again.
  void forget(const std::string& domain) {
    retire(domain);
    summaries_.erase(domain);
    history_.erase(domain);
  }

  const ProbeSummary* summary(const std::string& domain) const {
    const auto it = summaries_.find(domain);
    return it == summaries_.end() ? nullptr : &it->second;
  }

  std::optional<Timestamp> last_valid_ns_response(const std::string& domain) const {
    const auto* s = summary(domain);
    return s ? s->last_valid_ns : std::nullopt;
  }

  const std::vector<ProbeResult>& history(const std::string& domain) const {
    static const std::vector<ProbeResult> kEmpty;
    const auto it = history_.find(domain);
    return it == history_.end() ? kEmpty : it->second;
  }

  const ProbePlan* plan(const std::string& domain) const {
    const auto it = plans_.find(domain);
    return it == plans_.end() ? nullptr : &it->second;
  }

  std::uint64_t rounds_total() const { return rounds_total_; }
  std::uint64_t queries_sent() const { return queries_sent_.load(); }
  std::uint64_t ns_queries_sent() const { return ns_queries_.load(); }
  const ProbeConfig& config() const { return cfg_; }

  nlohmann::json to_json() const {
    nlohmann::json plans = nlohmann::json::array();
    for (const auto& [d, p] : plans_) {
      plans.push_back({{"domain", d},
                       {"t0", to_epoch(p.t0)},
                       {"next_due", to_epoch(p.next_due)},
                       {"anchor", to_epoch(p.anchor)},
                       {"anchor_round", p.anchor_round},
                       {"next_round", p.next_round},
                       {"catch_ups", p.catch_ups}});
    }
    nlohmann::json sums = nlohmann::json::object();
    for (const auto& [d, s] : summaries_) {
      nlohmann::json j{{"rounds", s.rounds}, {"queries", s.queries}};
      auto opt = [&](const char* k, const std::optional<Timestamp>& t) {
        j[k] = t ? nlohmann::json(to_epoch(*t)) : nlohmann::json(nullptr);
      };
      opt("first_valid_ns", s.first_valid_ns);
      opt("last_valid_ns", s.last_valid_ns);
      opt("deletion_inferred_at", s.deletion_inferred_at);
      j["last_ns_set"] = s.last_ns_set ? nlohmann::json(*s.last_ns_set) : nlohmann::json(nullptr);
      j["last_ns_rcode"] = s.last_ns_rcode ? nlohmann::json(dns::to_string(*s.last_ns_rcode)) : nlohmann::json(nullptr);
      nlohmann::json changes = nlohmann::json::array();
      for (const auto& c : s.ns_changes) {
        changes.push_back({{"round", c.round}, {"old", c.old_ns_set}, {"new", c.new_ns_set}, {"at", to_epoch(c.at)}});
      }
      j["ns_changes"] = changes;
      sums[d] = j;
    }
    return {{"plans", plans}, {"summaries", sums}, {"rounds_total", rounds_total_}, {"queries_sent", queries_sent_.load()}};
  }

  void restore(const nlohmann::json& j) {
    plans_.clear();
    queue_.clear();
    summaries_.clear();
    for (const auto& [d, s] : j.at("summaries").items()) {
      ProbeSummary sum;
      const auto dom = registrable_from_full(d);
      sum.rounds = s.at("rounds").get<int>();
      sum.queries = s.at("queries").get<std::uint64_t>();
      auto opt = [&](const char* k) -> std::optional<Timestamp> {
        return s.at(k).is_null() ? std::nullopt : std::optional<Timestamp>(from_epoch(s.at(k).get<std::int64_t>()));
      };
      sum.first_valid_ns = opt("first_valid_ns");
      sum.last_valid_ns = opt("last_valid_ns");
      sum.deletion_inferred_at = opt("deletion_inferred_at");
      if (!s.at("last_ns_set").is_null()) sum.last_ns_set = s.at("last_ns_set").get<std::set<std::string>>();
      if (!s.at("last_ns_rcode").is_null()) {
        sum.last_ns_rcode = dns::probe_rcode_from_string(s.at("last_ns_rcode").get<std::string>());
      }
      for (const auto& c : s.at("ns_changes")) {
        sum.ns_changes.push_back(NsChangeEvent{dom, c.at("round").get<int>(), c.at("old").get<std::set<std::string>>(),
                                               c.at("new").get<std::set<std::string>>(),
                                               from_epoch(c.at("at").get<std::int64_t>())});
      }
      summaries_[d] = std::move(sum);
    }
    for (const auto& pj : j.at("plans")) {
      ProbePlan p;
      const auto d = pj.at("domain").get<std::string>();
      p.domain = registrable_from_full(d);
      p.t0 = from_epoch(pj.at("t0").get<std::int64_t>());
      p.interval = cfg_.interval;
      p.horizon = cfg_.horizon;
      p.next_due = from_epoch(pj.at("next_due").get<std::int64_t>());
      p.anchor = from_epoch(pj.at("anchor").get<std::int64_t>());
      p.anchor_round = pj.at("anchor_round").get<int>();
      p.next_round = pj.at("next_round").get<int>();
      p.catch_ups = pj.at("catch_ups").get<int>();
      plans_[d] = p;
      queue_.emplace(p.next_due, d);
    }
    rounds_total_ = j.at("rounds_total").get<std::uint64_t>();
    queries_sent_ = j.at("queries_sent").get<std::uint64_t>();
  }

 private:
  /// Moves the plan past `now`. More than one overdue round collapses into the
  /// round just executed and the schedule restarts from `now`.
  static void advance(ProbePlan& plan, Timestamp now) {
    const Timestamp following = plan.due_of(plan.next_round + 1);
    ++plan.next_round;
    if (following <= now) {
      plan.anchor = now;
      plan.anchor_round = plan.next_round - 1;
      ++plan.catch_ups;
    }
    plan.next_due = plan.due_of(plan.next_round);
  }

  ProbeResult query_recursive(const RegistrableDomain& d, std::uint16_t qtype, int round, Timestamp now) {
    queries_sent_.fetch_add(1, std::memory_order_relaxed);
    const auto res = recursive_.resolve(d.full(), qtype);
    ProbeResult r;
    r.domain = d;
    r.round = round;
    r.qtype = qtype;
    r.path = ProbePath::Recursive;
    r.rcode = res.rcode;
    r.answers = res.answers;
    r.queried_server = res.server;
    r.at = now;
    return r;
  }

  ProbeResult query_authoritative(const RegistrableDomain& d, int round, Timestamp now) {
    queries_sent_.fetch_add(1, std::memory_order_relaxed);
    ns_queries_.fetch_add(1, std::memory_order_relaxed);
    ProbeResult r;
    r.domain = d;
    r.round = round;
    r.qtype = dns::type::NS;
    r.path = ProbePath::TldAuthoritative;
    r.at = now;
    if (!authorities_.has(d.tld())) {
      r.rcode = ProbeRcode::Refused;
      return r;
    }
    const auto server = authorities_.next(d.tld());
    r.queried_server = server.to_string();
    const auto reply = auth_.query(server, dns::make_query(ids_.next(), d.full(), dns::type::NS, false), cfg_.timeout);
    if (!reply) return r;
    r.rcode = dns::to_probe_rcode(reply->header.rcode);
    for (const auto& rr : reply->answers) {
      if (rr.rtype == dns::type::NS) r.answers.push_back(rr.text);
    }
    if (r.answers.empty()) {
      for (const auto& rr : reply->authority) {
        if (rr.rtype == dns::type::NS && rr.name == d.full()) r.answers.push_back(rr.text);
      }
      r.authority_referral = !r.answers.empty();
    }
    return r;
  }

  ProbeConfig cfg_;
  const Clock& clock_;
  dns::RecursiveResolver& recursive_;
  dns::DnsTransport& auth_;
  TldAuthorityMap authorities_;
  dns::QueryIdSource& ids_;
  WorkerPool pool_;
  ProbeResultSink sink_;
  bool keep_history_ = false;
  std::map<std::string, ProbePlan> plans_;
  std::set<std::pair<Timestamp, std::string>> queue_;
  std::map<std::string, ProbeSummary> summaries_;
  std::map<std::string, std::vector<ProbeResult>> history_;
  std::uint64_t rounds_total_ = 0;
  std::atomic<std::uint64_t> queries_sent_{0};
  std::atomic<std::uint64_t> ns_queries_{0};
};

}  // namespace darkdns
