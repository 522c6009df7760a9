#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "darkdns/classifier.hpp"
#include "darkdns/error.hpp"
#include "darkdns/name.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

struct BlocklistSnapshot {
  std::string list_name;
  Date snapshot_date;
  std::set<std::string> domains;
  /// Entries that named a hostname below the registrable domain.
  std::size_t hostname_attributed = 0;
  /// Lines that could not be reduced to a registrable domain.
  std::size_t skipped_lines = 0;
};

/// One entry per line; '#' starts a comment. Hosts-file style lines
/// ("0.0.0.0 evil.com") use the last field.
inline BlocklistSnapshot load_blocklist(std::istream& in, std::string list_name, Date date, const SuffixRuleSet& rules) {
  BlocklistSnapshot snap;
  snap.list_name = std::move(list_name);
  snap.snapshot_date = date;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string tok, entry;
    while (fields >> tok) entry = tok;
    if (entry.empty()) continue;
    try {
      const auto name = normalize_name(entry);
      const auto reg = extract_registrable(name, rules);
      if (reg.full() != name) ++snap.hostname_attributed;
      snap.domains.insert(reg.full());
    } catch (const Error&) {
      ++snap.skipped_lines;
    }
  }
  return snap;
}

inline BlocklistSnapshot load_blocklist(const std::filesystem::path& file, std::string list_name, Date date,
                                        const SuffixRuleSet& rules) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open blocklist " + file.string());
  return load_blocklist(in, std::move(list_name), date, rules);
}

struct FlagHit {
  std::string list_name;
  Date date;
  auto operator<=>(const FlagHit& o) const {
    if (auto c = date <=> o.date; c != 0) return c;
    return list_name <=> o.list_name;
  }
  bool operator==(const FlagHit&) const = default;
};

/// Keeps every loaded snapshot's contribution as a running minimum of
/// (date, list) per domain, so the answer does not depend on load order.
class BlocklistStore {
 public:
  void add(const BlocklistSnapshot& snap) {
    if (!loaded_.insert({snap.list_name, snap.snapshot_date}).second) {
      throw Error(ErrorCode::DuplicateSnapshot,
                  "blocklist " + snap.list_name + " already loaded for " + format_date(snap.snapshot_date));
    }
    hostname_attributed_ += snap.hostname_attributed;
    skipped_lines_ += snap.skipped_lines;
    const FlagHit hit{snap.list_name, snap.snapshot_date};
    for (const auto& d : snap.domains) {
      auto [it, inserted] = first_.try_emplace(d, hit);
      if (!inserted && hit < it->second) it->second = hit;
      auto& per_list = per_list_[d];
      auto [lt, fresh] = per_list.try_emplace(snap.list_name, snap.snapshot_date);
      if (!fresh && snap.snapshot_date < lt->second) lt->second = snap.snapshot_date;
    }
  }

  /// Loads <dir>/<list_name>/<YYYY-MM-DD>.txt for every list directory.
  void load_directory(const std::filesystem::path& dir, const SuffixRuleSet& rules) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::ConfigError, "not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& list : std::filesystem::directory_iterator(dir)) {
      if (!list.is_directory()) continue;
      for (const auto& f : std::filesystem::directory_iterator(list.path())) {
        if (f.path().extension() == ".txt") files.push_back(f.path());
      }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      add(load_blocklist(f, f.parent_path().filename().string(), parse_date(f.stem().string()), rules));
    }
  }

  std::optional<FlagHit> first_flag(const std::string& domain) const {
    const auto it = first_.find(domain);
    if (it == first_.end()) return std::nullopt;
    return it->second;
  }

  /// Earliest date per list for one domain.
  std::map<std::string, Date> per_list(const std::string& domain) const {
    const auto it = per_list_.find(domain);
    return it == per_list_.end() ? std::map<std::string, Date>{} : it->second;
  }

  std::size_t flagged_count() const { return first_.size(); }
  std::size_t snapshot_count() const { return loaded_.size(); }
  std::size_t hostname_attributed() const { return hostname_attributed_; }
  std::size_t skipped_lines() const { return skipped_lines_; }

 private:
  std::set<std::pair<std::string, Date>> loaded_;
  std::map<std::string, FlagHit> first_;
  std::map<std::string, std::map<std::string, Date>> per_list_;
  std::size_t hostname_attributed_ = 0;
  std::size_t skipped_lines_ = 0;
};

/// Full-scan first flag over raw snapshots.
inline std::optional<FlagHit> first_flag(const std::string& domain, const std::vector<BlocklistSnapshot>& snapshots) {
  std::optional<FlagHit> best;
  for (const auto& s : snapshots) {
    if (!s.domains.count(domain)) continue;
    const FlagHit hit{s.list_name, s.snapshot_date};
    if (!best || hit < *best) best = hit;
  }
  return best;
}

enum class FlagCategory { BeforeRegistration, WhileActive, PostDeletion };

constexpr std::string_view to_string(FlagCategory c) {
  switch (c) {
    case FlagCategory::BeforeRegistration: return "BEFORE_REGISTRATION";
    case FlagCategory::WhileActive: return "WHILE_ACTIVE";
    case FlagCategory::PostDeletion: return "POST_DELETION";
  }
  return "?";
}

struct FlagTiming {
  RegistrableDomain domain;
  std::string list_name;
  Date first_flag_date;
  FlagCategory category = FlagCategory::WhileActive;
  /// Set when the flag came after registration but no deletion date was known.
  bool deletion_date_missing = false;
};

/// Date-granular: before the registration day, after the deletion day, or in
/// between (both ends inclusive).
inline FlagCategory classify_flag_date(Date registration, std::optional<Date> deletion, Date flag) {
  if (flag < registration) return FlagCategory::BeforeRegistration;
  if (deletion && flag > *deletion) return FlagCategory::PostDeletion;
  return FlagCategory::WhileActive;
}

/// The deletion date is taken from probe inference, falling back to the zone
/// removal date. With `strict`, a flag after registration on a domain without
/// a known deletion date throws MissingDeletionDate instead of defaulting to
/// WHILE_ACTIVE.
inline FlagTiming classify_timing(const DomainLifecycle& lc, const FlagHit& flag, bool strict = false) {
  if (!lc.rdap) throw Error(ErrorCode::InvalidParams, lc.domain.full() + " has no registration time");
  std::optional<Date> deletion;
  if (lc.deletion_inferred_at) {
    deletion = date_of(*lc.deletion_inferred_at);
  } else if (lc.zone_removed_on) {
    deletion = lc.zone_removed_on;
  }
  const Date reg = date_of(lc.rdap->registration_ts);
  FlagTiming t{lc.domain, flag.list_name, flag.date, classify_flag_date(reg, deletion, flag.date), false};
  if (!deletion && flag.date > reg) {
    if (strict) {
      throw Error(ErrorCode::MissingDeletionDate, lc.domain.full() + " has no deletion date; treated as active");
    }
    t.deletion_date_missing = true;
  }
  return t;
}

struct TimingSummary {
  std::uint64_t before_registration = 0;
  std::uint64_t while_active = 0;
  std::uint64_t post_deletion = 0;
  std::uint64_t deletion_date_missing = 0;

  std::uint64_t total() const { return before_registration + while_active + post_deletion; }
  void add(const FlagTiming& t) {
    switch (t.category) {
      case FlagCategory::BeforeRegistration: ++before_registration; break;
      case FlagCategory::WhileActive: ++while_active; break;
      case FlagCategory::PostDeletion: ++post_deletion; break;
    }
    if (t.deletion_date_missing) ++deletion_date_missing;
  }
};

struct BlocklistReport {
  std::vector<FlagTiming> rows;
  TimingSummary summary;

  std::string to_csv() const {
    std::ostringstream os;
    os << "domain,list,first_flag_date,category\n";
    for (const auto& r : rows) {
      os << r.domain.full() << ',' << r.list_name << ',' << format_date(r.first_flag_date) << ','
         << to_string(r.category) << '\n';
    }
    return os.str();
  }
};

/// Classifies every flagged lifecycle that has registration data.
inline BlocklistReport correlate(const std::vector<DomainLifecycle>& lifecycles, const BlocklistStore& store) {
  BlocklistReport rep;
  std::vector<const DomainLifecycle*> sorted;
  for (const auto& lc : lifecycles) {
    if (lc.rdap) sorted.push_back(&lc);
  }
  std::sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) {
    return a->domain != b->domain ? a->domain < b->domain : a->generation < b->generation;
  });
  for (const auto* lc : sorted) {
    const auto hit = store.first_flag(lc->domain.full());
    if (!hit) continue;
    rep.rows.push_back(classify_timing(*lc, *hit));
    rep.summary.add(rep.rows.back());
  }
  return rep;
}

}  // namespace darkdns
