#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "darkdns/error.hpp"
#include "darkdns/name.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

enum class FeedEvent { NrdDetected, Confirmed, Transient, EarlyRemoved, InZone };

constexpr std::string_view to_string(FeedEvent e) {
  switch (e) {
    case FeedEvent::NrdDetected: return "NRD_DETECTED";
    case FeedEvent::Confirmed: return "CONFIRMED";
    case FeedEvent::Transient: return "TRANSIENT";
    case FeedEvent::EarlyRemoved: return "EARLY_REMOVED";
    case FeedEvent::InZone: return "IN_ZONE";
  }
  return "?";
}

inline FeedEvent feed_event_from_string(std::string_view s) {
  for (auto e : {FeedEvent::NrdDetected, FeedEvent::Confirmed, FeedEvent::Transient, FeedEvent::EarlyRemoved,
                 FeedEvent::InZone}) {
    if (to_string(e) == s) return e;
  }
  throw Error(ErrorCode::ParseError, "unknown feed event '" + std::string(s) + "'");
}

struct FeedRecord {
  std::string domain;
  FeedEvent event = FeedEvent::NrdDetected;
  Timestamp at;
  std::optional<std::string> registrar_name;
  std::optional<std::int64_t> detection_lag_secs;

  std::string to_json_line() const {
    nlohmann::ordered_json j;
    j["domain"] = domain;
    j["event"] = to_string(event);
    j["at"] = format_rfc3339(at);
    j["registrar_name"] = registrar_name ? nlohmann::ordered_json(*registrar_name) : nlohmann::ordered_json(nullptr);
    j["detection_lag_secs"] =
        detection_lag_secs ? nlohmann::ordered_json(*detection_lag_secs) : nlohmann::ordered_json(nullptr);
    return j.dump();
  }

  static FeedRecord parse(std::string_view line) {
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ParseError, "feed line is not a JSON object");
    try {
      FeedRecord r;
      r.domain = normalize_name(j.at("domain").get<std::string>());
      r.event = feed_event_from_string(j.at("event").get<std::string>());
      r.at = parse_rfc3339(j.at("at").get<std::string>());
      if (const auto it = j.find("registrar_name"); it != j.end() && !it->is_null()) {
        r.registrar_name = it->get<std::string>();
      }
      if (const auto it = j.find("detection_lag_secs"); it != j.end() && !it->is_null()) {
        r.detection_lag_secs = it->get<std::int64_t>();
      }
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("feed record: ") + e.what());
    }
  }
};

inline std::string feed_file_name(Date d) { return "feed-" + format_date(d) + ".ndjson"; }

/// Destination for feed lines. append() must make the line durable before it
/// returns, or throw SinkUnavailable.
class FeedSink {
 public:
  virtual ~FeedSink() = default;
  virtual void append(const FeedRecord& rec, const std::string& line) = 0;
};

/// feed-YYYY-MM-DD.ndjson files in one directory, chosen by the record date.
class RotatingFileSink final : public FeedSink {
 public:
  explicit RotatingFileSink(std::filesystem::path dir, bool fsync_each = true) : dir_(std::move(dir)), fsync_(fsync_each) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::ConfigError, "cannot create feed directory " + dir_.string() + ": " + ec.message());
  }
  RotatingFileSink(const RotatingFileSink&) = delete;
  RotatingFileSink& operator=(const RotatingFileSink&) = delete;
  ~RotatingFileSink() override { close_current(); }

  void append(const FeedRecord& rec, const std::string& line) override {
    std::lock_guard lock(mu_);
    const Date day = date_of(rec.at);
    if (fd_ < 0 || day != day_) {
      close_current();
      const auto path = dir_ / feed_file_name(day);
      fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
      if (fd_ < 0) throw Error(ErrorCode::SinkUnavailable, "cannot open " + path.string());
      day_ = day;
    }
    const std::string buf = line + "\n";
    std::size_t off = 0;
    while (off < buf.size()) {
      const auto n = ::write(fd_, buf.data() + off, buf.size() - off);
      if (n <= 0) {
        close_current();
        throw Error(ErrorCode::SinkUnavailable, "write to feed failed");
      }
      off += static_cast<std::size_t>(n);
    }
    if (fsync_ && ::fsync(fd_) != 0) throw Error(ErrorCode::SinkUnavailable, "fsync of feed failed");
  }

  const std::filesystem::path& directory() const { return dir_; }

 private:
  void close_current() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::filesystem::path dir_;
  bool fsync_;
  std::mutex mu_;
  int fd_ = -1;
  Date day_{};
};

/// Keeps lines in memory; used by tests and the simulation.
class MemorySink final : public FeedSink {
 public:
  void append(const FeedRecord&, const std::string& line) override {
    std::lock_guard lock(mu_);
    lines_.push_back(line);
  }
  std::vector<std::string> lines() const {
    std::lock_guard lock(mu_);
    return lines_;
  }

 private:
  mutable std::mutex mu_;
  std::vector<std::string> lines_;
};

/// Reads every feed-*.ndjson in a directory in file-name order.
inline std::vector<std::string> read_feed_lines(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  if (std::filesystem::is_directory(dir)) {
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
      const auto name = e.path().filename().string();
      if (name.rfind("feed-", 0) == 0 && e.path().extension() == ".ndjson") files.push_back(e.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
  }
  return out;
}

using Sleeper = std::function<void(std::chrono::milliseconds)>;

inline void real_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

/// Exactly-once emission per (domain, event) and lifecycle generation.
/// A record is written only while the number of existing (domain, event)
/// records is at most the lifecycle generation, so replays are no-ops and
/// re-registrations get their own record.
class FeedWriter {
 public:
  explicit FeedWriter(FeedSink& sink, Sleeper sleeper = real_sleep, int max_attempts = 5,
                      std::chrono::milliseconds base_backoff = std::chrono::milliseconds(100))
      : sink_(sink), sleeper_(std::move(sleeper)), max_attempts_(max_attempts), base_backoff_(base_backoff) {}

  /// Seeds the idempotence index from previously written lines.
  void rebuild(const std::vector<std::string>& lines) {
    std::lock_guard lock(mu_);
    for (const auto& l : lines) {
      const auto rec = FeedRecord::parse(l);
      ++counts_[{rec.domain, rec.event}];
    }
  }

  /// Returns false when the record was already written.
  bool emit(const FeedRecord& rec, int generation = 0) {
    std::lock_guard lock(mu_);
    auto& n = counts_[{rec.domain, rec.event}];
    if (n > generation) {
      ++suppressed_;
      return false;
    }
    const auto line = rec.to_json_line();
    for (int attempt = 1;; ++attempt) {
      try {
        sink_.append(rec, line);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SinkUnavailable || attempt >= max_attempts_) throw;
        ++retries_;
        sleeper_(base_backoff_ * (1 << (attempt - 1)));
      }
    }
    ++n;
    ++written_;
    return true;
  }

  std::uint64_t written() const { return written_; }
  std::uint64_t suppressed() const { return suppressed_; }
  std::uint64_t retries() const { return retries_; }

 private:
  FeedSink& sink_;
  Sleeper sleeper_;
  int max_attempts_;
  std::chrono::milliseconds base_backoff_;
  std::mutex mu_;
  std::map<std::pair<std::string, FeedEvent>, int> counts_;
  std::uint64_t written_ = 0;
  std::uint64_t suppressed_ = 0;
  std::uint64_t retries_ = 0;
};

// ---------------------------------------------------------------------------
// Feed comparison

struct OverlapReport {
  std::optional<Date> date;
  std::uint64_t only_a = 0;
  std::uint64_t only_b = 0;
  std::uint64_t both = 0;
  /// 100 * both / |A u B|
  double overlap_pct = 0.0;
  /// 100 * both / |A| and 100 * both / |B|
  double a_in_b_pct = 0.0;
  double b_in_a_pct = 0.0;
  /// 100 * (|B| - |A|) / |A|
  double relative_size_pct = 0.0;

  std::uint64_t size_a() const { return only_a + both; }
  std::uint64_t size_b() const { return only_b + both; }
  std::uint64_t union_size() const { return only_a + only_b + both; }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["date"] = date ? nlohmann::ordered_json(format_date(*date)) : nlohmann::ordered_json(nullptr);
    j["only_a"] = only_a;
    j["only_b"] = only_b;
    j["both"] = both;
    j["overlap_pct"] = overlap_pct;
    j["a_in_b_pct"] = a_in_b_pct;
    j["b_in_a_pct"] = b_in_a_pct;
    j["relative_size_pct"] = relative_size_pct;
    return j;
  }
};

inline OverlapReport compare_sets(const std::set<std::string>& a, const std::set<std::string>& b) {
  OverlapReport r;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() || ib != b.end()) {
    if (ib == b.end() || (ia != a.end() && *ia < *ib)) {
      ++r.only_a;
      ++ia;
    } else if (ia == a.end() || *ib < *ia) {
      ++r.only_b;
      ++ib;
    } else {
      ++r.both;
      ++ia;
      ++ib;
    }
  }
  const auto pct = [](std::uint64_t num, std::uint64_t den) {
    return den ? 100.0 * static_cast<double>(num) / static_cast<double>(den) : 0.0;
  };
  r.overlap_pct = r.union_size() ? pct(r.both, r.union_size()) : 100.0;
  r.a_in_b_pct = pct(r.both, r.size_a());
  r.b_in_a_pct = pct(r.both, r.size_b());
  r.relative_size_pct = r.size_a() ? 100.0 * (static_cast<double>(r.size_b()) - static_cast<double>(r.size_a())) /
                                         static_cast<double>(r.size_a())
                                   : 0.0;
  return r;
}

struct FeedFilter {
  /// Keep only domains that have a record with this event.
  std::optional<FeedEvent> event;
  /// Keep only domains whose registration date (NRD_DETECTED at minus
  /// detection_lag_secs) equals this date.
  std::optional<Date> registration_date;
};

/// Applies the filter to NDJSON feed lines and returns the domain set. The
/// registration date of a domain is its NRD_DETECTED time minus the
/// detection lag carried by any of its records.
inline std::set<std::string> feed_domains(std::istream& in, const FeedFilter& filter) {
  std::map<std::string, std::set<FeedEvent>> events;
  std::map<std::string, Timestamp> detected_at;
  std::map<std::string, FeedRecord> with_lag;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    FeedRecord rec;
    try {
      rec = FeedRecord::parse(line);
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(lineno) + ": " + e.what());
    }
    events[rec.domain].insert(rec.event);
    if (rec.event == FeedEvent::NrdDetected && !detected_at.count(rec.domain)) detected_at[rec.domain] = rec.at;
    if (rec.detection_lag_secs && !with_lag.count(rec.domain)) with_lag[rec.domain] = rec;
  }
  std::set<std::string> out;
  for (const auto& [d, evs] : events) {
    if (filter.event && !evs.count(*filter.event)) continue;
    if (filter.registration_date) {
      const auto lag = with_lag.find(d);
      if (lag == with_lag.end()) continue;
      const auto det = detected_at.find(d);
      const Timestamp seen = det != detected_at.end() ? det->second : lag->second.at;
      if (date_of(seen - Duration{*lag->second.detection_lag_secs}) != *filter.registration_date) continue;
    }
    out.insert(d);
  }
  return out;
}

inline std::set<std::string> feed_domains(const std::filesystem::path& path, const FeedFilter& filter) {
  if (std::filesystem::is_directory(path)) {
    std::stringstream ss;
    for (const auto& l : read_feed_lines(path)) ss << l << '\n';
    return feed_domains(ss, filter);
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open feed " + path.string());
  return feed_domains(in, filter);
}

inline OverlapReport compare_feeds(const std::filesystem::path& a, const std::filesystem::path& b,
                                   const FeedFilter& filter = {}) {
  auto r = compare_sets(feed_domains(a, filter), feed_domains(b, filter));
  r.date = filter.registration_date;
  return r;
}

}  // namespace darkdns
