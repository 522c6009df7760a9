#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "darkdns/candidate.hpp"
#include "darkdns/error.hpp"
#include "darkdns/name.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"
#include "darkdns/zone_store.hpp"

namespace darkdns {

enum class EntryKind { Precert, LeafCert };

struct CertEvent {
  Timestamp seen_at;
  EntryKind entry_kind = EntryKind::Precert;
  /// CN and SAN entries as they appeared in the certificate.
  std::vector<std::string> names;
  std::string log_id;
};

/// Parses one certstream-style message:
/// {"message_type":"certificate_update","data":{"update_type":"PrecertLogEntry",
///  "leaf_cert":{"all_domains":[...]},"seen":1699178400.5,"source":{"url":"..."}}}
inline CertEvent parse_cert_event(std::string_view raw) {
  auto bad = [](const std::string& why) { return Error(ErrorCode::MalformedEvent, why); };
  nlohmann::json j = nlohmann::json::parse(raw, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
  const auto mt = j.find("message_type");
  if (mt == j.end() || !mt->is_string()) throw bad("missing message_type");
  if (*mt != "certificate_update") throw bad("message_type '" + mt->get<std::string>() + "' carries no certificate");
  const auto data = j.find("data");
  if (data == j.end() || !data->is_object()) throw bad("missing data object");

  CertEvent ev;
  const auto ut = data->find("update_type");
  if (ut == data->end() || !ut->is_string()) throw bad("missing data.update_type");
  if (*ut == "PrecertLogEntry") {
    ev.entry_kind = EntryKind::Precert;
  } else if (*ut == "X509LogEntry") {
    ev.entry_kind = EntryKind::LeafCert;
  } else {
    throw bad("unknown update_type '" + ut->get<std::string>() + "'");
  }

  const auto leaf = data->find("leaf_cert");
  if (leaf == data->end() || !leaf->is_object()) throw bad("missing data.leaf_cert");
  const auto names = leaf->find("all_domains");
  if (names == leaf->end() || !names->is_array() || names->empty()) throw bad("missing or empty all_domains");
  for (const auto& n : *names) {
    if (!n.is_string()) throw bad("non-string entry in all_domains");
    ev.names.push_back(n.get<std::string>());
  }

  const auto seen = data->find("seen");
  if (seen == data->end() || !seen->is_number()) throw bad("missing data.seen");
  ev.seen_at = from_epoch_fractional(seen->get<double>());

  if (const auto src = data->find("source"); src != data->end() && src->is_object()) {
    if (const auto url = src->find("url"); url != src->end() && url->is_string()) ev.log_id = url->get<std::string>();
  }
  return ev;
}

/// Renders the fixture format accepted by parse_cert_event.
inline std::string cert_event_to_json_line(const CertEvent& ev) {
  nlohmann::ordered_json j;
  j["message_type"] = "certificate_update";
  j["data"]["update_type"] = ev.entry_kind == EntryKind::Precert ? "PrecertLogEntry" : "X509LogEntry";
  j["data"]["leaf_cert"]["all_domains"] = ev.names;
  j["data"]["seen"] = static_cast<double>(to_epoch(ev.seen_at));
  j["data"]["source"]["url"] = ev.log_id;
  return j.dump();
}

struct IngestCounters {
  std::atomic<std::uint64_t> events{0};
  std::atomic<std::uint64_t> malformed_events{0};
  std::atomic<std::uint64_t> leaf_certs_dropped{0};
  std::atomic<std::uint64_t> names_dropped{0};
  std::atomic<std::uint64_t> known_domains{0};
  std::atomic<std::uint64_t> duplicates{0};
  std::atomic<std::uint64_t> quarantined{0};
  std::atomic<std::uint64_t> candidates{0};
};

/// Distinct registrable domains named by a precertificate. Names that fail
/// normalization or suffix extraction are counted and dropped, never guessed.
inline std::set<RegistrableDomain> extract_candidates(const CertEvent& ev, const SuffixRuleSet& rules,
                                                      IngestCounters* counters = nullptr,
                                                      bool include_leaf_certs = false) {
  std::set<RegistrableDomain> out;
  if (ev.entry_kind != EntryKind::Precert && !include_leaf_certs) {
    if (counters) counters->leaf_certs_dropped.fetch_add(1, std::memory_order_relaxed);
    return out;
  }
  for (const auto& raw : ev.names) {
    try {
      out.insert(extract_registrable(normalize_name(raw), rules));
    } catch (const Error&) {
      if (counters) counters->names_dropped.fetch_add(1, std::memory_order_relaxed);
    }
  }
  return out;
}

/// Time-bounded dedup memory. Readers may run concurrently; writers serialize.
class SeenSet {
 public:
  explicit SeenSet(Duration retention) : retention_(retention) {}

  /// Records a sighting. Returns true the first time the domain is seen
  /// within the retention period.
  bool observe(const std::string& domain, Timestamp at) {
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = seen_.try_emplace(domain, at);
    if (!inserted && at < it->second) it->second = at;
    return inserted;
  }

  bool contains(const std::string& domain) const {
    std::shared_lock lock(mutex_);
    return seen_.count(domain) > 0;
  }

  std::optional<Timestamp> first_seen(const std::string& domain) const {
    std::shared_lock lock(mutex_);
    const auto it = seen_.find(domain);
    if (it == seen_.end()) return std::nullopt;
    return it->second;
  }

  /// Allows the domain to be emitted again (used after a deletion so a
  /// re-registration can surface as a new candidate).
  void forget(const std::string& domain) {
    std::unique_lock lock(mutex_);
    seen_.erase(domain);
  }

  std::size_t expire(Timestamp now) {
    std::unique_lock lock(mutex_);
    std::size_t n = 0;
    for (auto it = seen_.begin(); it != seen_.end();) {
      if (it->second + retention_ < now) {
        it = seen_.erase(it);
        ++n;
      } else {
        ++it;
      }
    }
    return n;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return seen_.size();
  }

  Duration retention() const { return retention_; }

  nlohmann::json to_json() const {
    std::shared_lock lock(mutex_);
    std::map<std::string, std::int64_t> sorted;
    for (const auto& [d, t] : seen_) sorted.emplace(d, to_epoch(t));
    return sorted;
  }

  void restore(const nlohmann::json& j) {
    std::unique_lock lock(mutex_);
    seen_.clear();
    for (const auto& [d, t] : j.items()) seen_.emplace(d, from_epoch(t.get<std::int64_t>()));
  }

 private:
  Duration retention_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, Timestamp> seen_;
};

struct FilterResult {
  std::vector<CandidateNRD> emitted;
  /// Domains whose TLD has no loaded snapshot; kept out of the candidate stream.
  std::vector<RegistrableDomain> quarantined;
};

/// Emits the domains absent from the latest snapshot of their TLD that have not
/// been emitted before. Callers must feed events for the same domain in arrival order.
inline FilterResult filter_new(const std::set<RegistrableDomain>& domains, const ZoneMembershipView& zones,
                               SeenSet& seen, Timestamp seen_at, const std::string& source_log,
                               IngestCounters* counters = nullptr) {
  FilterResult out;
  for (const auto& d : domains) {
    const auto present = zones.latest_contains(d.tld(), d.label());
    if (!present) {
      out.quarantined.push_back(d);
      if (counters) counters->quarantined.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    if (*present) {
      if (counters) counters->known_domains.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    if (!seen.observe(d.full(), seen_at)) {
      if (counters) counters->duplicates.fetch_add(1, std::memory_order_relaxed);
      continue;
    }
    out.emitted.push_back(CandidateNRD{d, seen_at, source_log});
    if (counters) counters->candidates.fetch_add(1, std::memory_order_relaxed);
  }
  return out;
}

/// Maps a domain to a worker partition so every event for one domain lands on
/// the same worker and keeps arrival order.
inline std::size_t partition_for(const RegistrableDomain& d, std::size_t partitions) {
  return partitions == 0 ? 0 : std::hash<std::string>{}(d.full()) % partitions;
}

}  // namespace darkdns
