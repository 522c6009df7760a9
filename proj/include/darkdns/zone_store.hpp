#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_set>
#include <variant>
#include <vector>

#include "darkdns/bloom.hpp"
#include "darkdns/candidate.hpp"
#include "darkdns/error.hpp"
#include "darkdns/name.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

// ---------------------------------------------------------------------------
// Zone file parsing

struct ZoneParseResult {
  /// Sorted, unique second-level labels delegated via NS.
  std::vector<std::string> labels;
  std::size_t records = 0;
  std::size_t ignored_records = 0;
};

namespace detail {

inline std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

inline std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(c >= 'a' && c <= 'z' ? c - 'a' + 'A' : c);
  return s;
}

inline bool is_class(const std::string& t) {
  const auto u = upper(t);
  return u == "IN" || u == "CH" || u == "HS" || u == "CS";
}

inline bool is_ttl(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool is_known_type(const std::string& u) {
  static const std::unordered_set<std::string> kTypes = {
      "A",    "AAAA",  "NS",   "SOA",    "DS",         "RRSIG", "NSEC", "NSEC3",
      "NSEC3PARAM", "DNSKEY", "CNAME", "TXT", "MX", "CDS", "CDNSKEY", "ZONEMD"};
  return kTypes.count(u) > 0;
}

}  // namespace detail

/// Parses presentation-format zone lines. Only NS records whose owner sits one
/// label below `tld` define membership; A/AAAA glue and DNSSEC types are skipped.
inline ZoneParseResult parse_zone(std::istream& in, std::string_view tld) {
  const std::string zone = normalize_name(tld);
  std::string origin = zone;
  std::string previous_owner;
  std::set<std::string> members;
  ZoneParseResult result;
  std::string raw;
  std::size_t line_no = 0;
  auto error = [&](const std::string& why) {
    return Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto sc = line.find(';'); sc != std::string_view::npos) line = line.substr(0, sc);
    auto tokens = detail::tokenize(line);
    if (tokens.empty()) continue;
    if (tokens[0][0] == '$') {
      const auto directive = detail::upper(tokens[0]);
      if (directive == "$ORIGIN") {
        if (tokens.size() != 2) throw error("$ORIGIN needs exactly one argument");
        if (tokens[1] == ".") {
          origin.clear();
        } else {
          try {
            origin = normalize_name(tokens[1]);
          } catch (const Error& e) {
            throw error(e.what());
          }
        }
      } else if (directive == "$TTL") {
        if (tokens.size() != 2 || !detail::is_ttl(tokens[1])) throw error("malformed $TTL");
      } else {
        throw error("unsupported directive " + tokens[0]);
      }
      continue;
    }

    std::size_t idx = 0;
    std::string owner;
    const bool continuation = raw[0] == ' ' || raw[0] == '\t';
    if (continuation) {
      if (previous_owner.empty()) throw error("record without owner");
      owner = previous_owner;
    } else {
      const std::string& tok = tokens[idx++];
      try {
        if (tok == "@") {
          owner = origin;
        } else if (tok.back() == '.') {
          owner = tok == "." ? std::string{} : normalize_name(tok);
        } else {
          const std::string rel = normalize_name(tok);
          owner = origin.empty() ? rel : rel + "." + origin;
        }
      } catch (const Error& e) {
        throw error(e.what());
      }
      previous_owner = owner;
    }
    for (int k = 0; k < 2 && idx < tokens.size(); ++k) {
      if (detail::is_ttl(tokens[idx]) || detail::is_class(tokens[idx])) ++idx;
    }
    if (idx >= tokens.size()) throw error("missing record type");
    const std::string type = detail::upper(tokens[idx++]);
    if (!detail::is_known_type(type)) throw error("unknown record type '" + type + "'");
    if (idx >= tokens.size()) throw error("missing rdata");
    ++result.records;

    if (type != "NS" || owner.size() <= zone.size() + 1 ||
        owner.compare(owner.size() - zone.size(), zone.size(), zone) != 0 ||
        owner[owner.size() - zone.size() - 1] != '.') {
      ++result.ignored_records;
      continue;
    }
    const std::string label = owner.substr(0, owner.size() - zone.size() - 1);
    if (label.find('.') != std::string::npos) {
      ++result.ignored_records;
      continue;
    }
    members.insert(label);
  }
  result.labels.assign(members.begin(), members.end());
  return result;
}

// ---------------------------------------------------------------------------
// Snapshots

enum class MembershipMode { Exact, Approximate };

/// Immutable set of labels. Approximate mode trades exactness for memory but
/// never reports a false negative.
class Membership {
 public:
  static std::shared_ptr<const Membership> exact(std::vector<std::string> sorted_labels) {
    auto m = std::make_shared<Membership>();
    m->size_ = sorted_labels.size();
    m->data_ = std::move(sorted_labels);
    return m;
  }

  static std::shared_ptr<const Membership> approximate(const std::vector<std::string>& labels,
                                                        double false_positive_rate = 1e-4) {
    auto m = std::make_shared<Membership>();
    BloomFilter bloom(labels.size(), false_positive_rate);
    for (const auto& l : labels) bloom.insert(l);
    m->size_ = labels.size();
    m->data_ = std::move(bloom);
    return m;
  }

  bool contains(std::string_view label) const {
    if (const auto* v = std::get_if<std::vector<std::string>>(&data_)) {
      return std::binary_search(v->begin(), v->end(), label);
    }
    return std::get<BloomFilter>(data_).possibly_contains(label);
  }

  bool is_exact() const { return std::holds_alternative<std::vector<std::string>>(data_); }

  const std::vector<std::string>& labels() const {
    if (!is_exact()) throw Error(ErrorCode::ApproximateMembership, "label enumeration needs exact membership");
    return std::get<std::vector<std::string>>(data_);
  }

  std::size_t size() const { return size_; }

 private:
  std::variant<std::vector<std::string>, BloomFilter> data_;
  std::size_t size_ = 0;
};

struct ZoneSnapshot {
  std::string tld;
  Date snapshot_date;
  std::shared_ptr<const Membership> domains;
  Timestamp loaded_at;

  bool contains(std::string_view label) const { return domains->contains(label); }
};

struct ZoneDiff {
  std::string tld;
  Date from_date;
  Date to_date;
  std::vector<std::string> added;
  std::vector<std::string> removed;
};

/// Read access to the newest snapshot per TLD. nullopt means no snapshot has
/// ever been loaded for that TLD.
class ZoneMembershipView {
 public:
  virtual ~ZoneMembershipView() = default;
  virtual std::optional<bool> latest_contains(const std::string& tld, std::string_view label) const = 0;
};

/// Consistent copy of the latest pointers, taken under one lock.
class LatestZoneView final : public ZoneMembershipView {
 public:
  explicit LatestZoneView(std::map<std::string, std::shared_ptr<const ZoneSnapshot>> latest)
      : latest_(std::move(latest)) {}

  std::optional<bool> latest_contains(const std::string& tld, std::string_view label) const override {
    const auto it = latest_.find(tld);
    if (it == latest_.end()) return std::nullopt;
    return it->second->contains(label);
  }

  std::optional<Date> latest_date(const std::string& tld) const {
    const auto it = latest_.find(tld);
    if (it == latest_.end()) return std::nullopt;
    return it->second->snapshot_date;
  }

 private:
  std::map<std::string, std::shared_ptr<const ZoneSnapshot>> latest_;
};

/// Queries across every loaded date, used to check whether a domain existed in the past.
class HistoricalZoneView {
 public:
  virtual ~HistoricalZoneView() = default;
  virtual bool existed_before(const std::string& tld, std::string_view label, Date cutoff) const = 0;
};

/// All loaded snapshots, keyed by TLD and date. The per-TLD "latest" view
/// follows the maximum date, not load order, so late snapshots back-fill history.
class ZoneStore final : public ZoneMembershipView, public HistoricalZoneView {
 public:
  explicit ZoneStore(MembershipMode mode = MembershipMode::Exact) : mode_(mode) {}

  std::shared_ptr<const ZoneSnapshot> load_snapshot(const std::filesystem::path& file, const std::string& tld,
                                                    Date date, Timestamp loaded_at = {}) {
    std::ifstream in(file);
    if (!in) throw Error(ErrorCode::ParseError, "cannot open zone file " + file.string());
    try {
      return load_snapshot(in, tld, date, loaded_at);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw Error(ErrorCode::ParseError, file.string() + ": " + e.what());
      throw;
    }
  }

  std::shared_ptr<const ZoneSnapshot> load_snapshot(std::istream& in, const std::string& tld, Date date,
                                                    Timestamp loaded_at = {}) {
    const std::string zone = normalize_name(tld);
    {
      std::shared_lock lock(mutex_);
      if (has_date_locked(zone, date)) throw duplicate(zone, date);
    }
    auto parsed = parse_zone(in, zone);
    return add_snapshot(zone, date, std::move(parsed.labels), loaded_at);
  }

  std::shared_ptr<const ZoneSnapshot> add_snapshot(const std::string& tld, Date date, std::vector<std::string> labels,
                                                   Timestamp loaded_at = {}) {
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    auto snap = std::make_shared<ZoneSnapshot>();
    snap->tld = tld;
    snap->snapshot_date = date;
    snap->loaded_at = loaded_at;
    if (labels.empty()) empty_snapshots_.fetch_add(1, std::memory_order_relaxed);
    snap->domains = mode_ == MembershipMode::Exact ? Membership::exact(std::move(labels))
                                                    : Membership::approximate(labels);
    std::unique_lock lock(mutex_);
    auto& by_date = zones_[tld];
    if (by_date.count(date)) throw duplicate(tld, date);
    by_date.emplace(date, snap);
    return snap;
  }

  bool has_tld(const std::string& tld) const {
    std::shared_lock lock(mutex_);
    return zones_.count(tld) > 0;
  }

  bool has_snapshot(const std::string& tld, Date date) const {
    std::shared_lock lock(mutex_);
    return has_date_locked(tld, date);
  }

  /// Membership in the latest snapshot of `tld`.
  bool contains(const std::string& tld, std::string_view label) const {
    const auto r = latest_contains(tld, label);
    if (!r) throw Error(ErrorCode::UnknownTld, "no snapshot loaded for ." + tld);
    return *r;
  }

  std::optional<bool> latest_contains(const std::string& tld, std::string_view label) const override {
    std::shared_ptr<const ZoneSnapshot> snap;
    {
      std::shared_lock lock(mutex_);
      const auto it = zones_.find(tld);
      if (it == zones_.end() || it->second.empty()) return std::nullopt;
      snap = it->second.rbegin()->second;
    }
    return snap->contains(label);
  }

  LatestZoneView latest_view() const {
    std::map<std::string, std::shared_ptr<const ZoneSnapshot>> latest;
    std::shared_lock lock(mutex_);
    for (const auto& [tld, by_date] : zones_) {
      if (!by_date.empty()) latest.emplace(tld, by_date.rbegin()->second);
    }
    return LatestZoneView(std::move(latest));
  }

  std::optional<Date> latest_date(const std::string& tld) const {
    std::shared_lock lock(mutex_);
    const auto it = zones_.find(tld);
    if (it == zones_.end() || it->second.empty()) return std::nullopt;
    return it->second.rbegin()->first;
  }

  std::shared_ptr<const ZoneSnapshot> snapshot(const std::string& tld, Date date) const {
    std::shared_lock lock(mutex_);
    const auto it = zones_.find(tld);
    if (it == zones_.end()) return nullptr;
    const auto jt = it->second.find(date);
    return jt == it->second.end() ? nullptr : jt->second;
  }

  std::vector<Date> dates(const std::string& tld) const {
    std::vector<Date> out;
    std::shared_lock lock(mutex_);
    if (const auto it = zones_.find(tld); it != zones_.end()) {
      for (const auto& [d, _] : it->second) out.push_back(d);
    }
    return out;
  }

  std::vector<std::string> tlds() const {
    std::vector<std::string> out;
    std::shared_lock lock(mutex_);
    for (const auto& [tld, _] : zones_) out.push_back(tld);
    return out;
  }

  ZoneDiff diff_snapshots(const std::string& tld, Date from, Date to) const {
    const auto a = snapshot(tld, from);
    const auto b = snapshot(tld, to);
    if (!a || !b) {
      throw Error(ErrorCode::MissingSnapshot,
                  "." + tld + " " + format_date(a ? to : from) + " is not loaded");
    }
    ZoneDiff diff{tld, from, to, {}, {}};
    const auto& la = a->domains->labels();
    const auto& lb = b->domains->labels();
    std::set_difference(lb.begin(), lb.end(), la.begin(), la.end(), std::back_inserter(diff.added));
    std::set_difference(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(diff.removed));
    return diff;
  }

  /// Dates in [from, to] whose snapshot contains the label.
  std::vector<Date> appearances(const std::string& tld, std::string_view label, Date from, Date to) const {
    std::vector<std::shared_ptr<const ZoneSnapshot>> snaps;
    {
      std::shared_lock lock(mutex_);
      const auto it = zones_.find(tld);
      if (it == zones_.end()) return {};
      for (auto jt = it->second.lower_bound(from); jt != it->second.end() && jt->first <= to; ++jt) {
        snaps.push_back(jt->second);
      }
    }
    std::vector<Date> out;
    for (const auto& s : snaps) {
      if (s->contains(label)) out.push_back(s->snapshot_date);
    }
    return out;
  }

  bool existed_before(const std::string& tld, std::string_view label, Date cutoff) const override {
    std::shared_lock lock(mutex_);
    const auto it = zones_.find(tld);
    if (it == zones_.end()) return false;
    for (auto jt = it->second.begin(); jt != it->second.end() && jt->first < cutoff; ++jt) {
      if (jt->second->contains(label)) return true;
    }
    return false;
  }

  std::size_t empty_snapshot_warnings() const { return empty_snapshots_.load(); }
  MembershipMode mode() const { return mode_; }

 private:
  bool has_date_locked(const std::string& tld, Date date) const {
    const auto it = zones_.find(tld);
    return it != zones_.end() && it->second.count(date) > 0;
  }

  static Error duplicate(const std::string& tld, Date date) {
    return Error(ErrorCode::DuplicateSnapshot, "." + tld + " " + format_date(date) + " already loaded");
  }

  MembershipMode mode_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::map<Date, std::shared_ptr<const ZoneSnapshot>>> zones_;
  std::atomic<std::size_t> empty_snapshots_{0};
};

// ---------------------------------------------------------------------------
// Coverage of CT-detected NRDs versus zone-diff NRDs

struct CoverageRow {
  std::string tld;
  std::uint64_t detected_nrd = 0;
  std::uint64_t zone_nrd = 0;
  /// Percentage rounded half-up to one decimal.
  double coverage_pct = 0.0;
};

/// 100 * detected / zone, rounded half-up to one decimal, computed in integer
/// arithmetic so ties round deterministically.
inline double coverage_percent(std::uint64_t detected, std::uint64_t zone) {
  if (zone == 0) return 0.0;
  const std::uint64_t tenths = (2000 * detected + zone) / (2 * zone);
  return static_cast<double>(tenths) / 10.0;
}

struct CoverageReport {
  std::vector<CoverageRow> rows;
  CoverageRow total;

  std::string to_csv() const {
    std::ostringstream out;
    out << "tld,detected,zone_nrd,coverage_pct\n";
    auto row = [&](const CoverageRow& r) {
      char pct[32];
      std::snprintf(pct, sizeof pct, "%.1f", r.coverage_pct);
      out << r.tld << ',' << r.detected_nrd << ',' << r.zone_nrd << ',' << pct << '\n';
    };
    for (const auto& r : rows) row(r);
    row(total);
    return out.str();
  }
};

/// Builds a report from per-TLD counts; the totals row sums the columns and
/// recomputes the percentage from the sums.
inline CoverageReport coverage_from_counts(std::vector<CoverageRow> counts) {
  CoverageReport rep;
  rep.total.tld = "total";
  for (auto& r : counts) {
    r.coverage_pct = coverage_percent(r.detected_nrd, r.zone_nrd);
    rep.total.detected_nrd += r.detected_nrd;
    rep.total.zone_nrd += r.zone_nrd;
    rep.rows.push_back(std::move(r));
  }
  rep.total.coverage_pct = coverage_percent(rep.total.detected_nrd, rep.total.zone_nrd);
  return rep;
}

/// detected_nrd counts candidates that also appear among the zone-diff additions of their TLD.
inline CoverageReport coverage(const std::vector<CandidateNRD>& detected,
                               const std::map<std::string, std::set<std::string>>& zone_nrds) {
  std::map<std::string, std::set<std::string>> matched;
  for (const auto& c : detected) {
    const auto it = zone_nrds.find(c.domain.tld());
    if (it != zone_nrds.end() && it->second.count(c.domain.label())) matched[c.domain.tld()].insert(c.domain.label());
  }
  std::vector<CoverageRow> rows;
  for (const auto& [tld, added] : zone_nrds) {
    CoverageRow r;
    r.tld = tld;
    r.zone_nrd = added.size();
    if (const auto it = matched.find(tld); it != matched.end()) r.detected_nrd = it->second.size();
    rows.push_back(r);
  }
  return coverage_from_counts(std::move(rows));
}

/// Reads "tld,detected,zone_nrd" rows (header optional, extra columns ignored).
inline std::vector<CoverageRow> parse_coverage_counts(std::istream& in) {
  std::vector<CoverageRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, ',')) cols.push_back(col);
    if (cols.size() < 3) throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 3 columns");
    if (line_no == 1 && !detail::is_ttl(cols[1])) continue;  // header
    if (!detail::is_ttl(cols[1]) || !detail::is_ttl(cols[2])) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": non-numeric count");
    }
    rows.push_back(CoverageRow{cols[0], std::stoull(cols[1]), std::stoull(cols[2]), 0.0});
  }
  return rows;
}

}  // namespace darkdns
