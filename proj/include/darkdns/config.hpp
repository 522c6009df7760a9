#pragma once

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>

#include "darkdns/error.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

/// Flat view of a TOML-style file: "section.key" -> scalar text.
/// Supports [section] headers, key = value, "strings", integers, booleans and
/// '#' comments.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::istream& in, const std::string& origin = "<config>") {
    KeyValueConfig c;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') fail(origin, lineno, "unterminated section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section.empty()) fail(origin, lineno, "empty section name");
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(origin, lineno, "expected key = value");
      const auto key = trim(line.substr(0, eq));
      auto value = trim(line.substr(eq + 1));
      if (key.empty()) fail(origin, lineno, "empty key");
      if (!value.empty() && value.front() == '"') {
        if (value.size() < 2 || value.back() != '"') fail(origin, lineno, "unterminated string");
        value = value.substr(1, value.size() - 2);
      }
      c.values_[section.empty() ? key : section + "." + key] = value;
    }
    return c;
  }

  static KeyValueConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "config file not found: " + path.string());
    return parse(in, path.string());
  }

  std::optional<std::string> get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  static std::string strip_comment(const std::string& s) {
    bool in_str = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_str = !in_str;
      if (s[i] == '#' && !in_str) return s.substr(0, i);
    }
    return s;
  }
  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
  }
  [[noreturn]] static void fail(const std::string& origin, std::size_t line, const std::string& what) {
    throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(line) + ": " + what);
  }

  std::map<std::string, std::string> values_;
};

struct PipelineConfig {
  struct Paths {
    std::filesystem::path suffix_rules = "data/public_suffix_list.dat";
    std::filesystem::path zone_dir = "zones";
    std::filesystem::path rdap_bootstrap = "data/rdap_bootstrap.json";
    std::filesystem::path tld_auth_map = "data/tld_authorities.json";
    std::filesystem::path blocklist_dir;
    std::filesystem::path feed_dir = "feed";
    std::filesystem::path state_dir = "state";
    std::filesystem::path ct_input;
  } paths;

  Date window_start = parse_date("2023-11-01");
  Date window_end = parse_date("2024-01-31");
  int slack_days = 3;

  std::int64_t probe_interval_secs = 600;
  std::int64_t probe_horizon_secs = 48 * 3600;
  std::size_t probe_workers = 16;
  std::int64_t dns_timeout_ms = 5000;
  std::string recursive_resolver = "127.0.0.1:53";
  bool enroll_on_candidate = true;

  double rdap_rate_per_min = 10.0;
  std::size_t rdap_concurrency = 4;
  std::int64_t rdap_fetch_delay_secs = 0;
  std::int64_t rdap_reprobe_delay_secs = 6 * 3600;

  bool include_leaf_certs = false;
  bool include_private_suffixes = true;
  bool approximate_membership = false;
  std::string websocket_url;

  bool metrics_enabled = false;
  std::string metrics_host = "127.0.0.1";
  int metrics_port = 9109;

  bool feed_fsync = true;

  using Env = std::function<std::optional<std::string>(const std::string&)>;

  static std::optional<std::string> process_env(const std::string& name) {
    const char* v = std::getenv(name.c_str());
    return v ? std::optional<std::string>(v) : std::nullopt;
  }

  /// Defaults, then the file (if given), then environment overrides.
  static PipelineConfig load(const std::optional<std::filesystem::path>& file, const Env& env = process_env) {
    PipelineConfig c;
    if (file) c.apply(KeyValueConfig::load(*file), file->parent_path());
    c.apply_env(env);
    return c;
  }

  void apply(const KeyValueConfig& kv, const std::filesystem::path& base = {}) {
    auto path = [&](const char* key, std::filesystem::path& out) {
      if (auto v = kv.get(key)) out = resolve(base, *v);
    };
    path("paths.suffix_rules", paths.suffix_rules);
    path("paths.zone_dir", paths.zone_dir);
    path("paths.rdap_bootstrap", paths.rdap_bootstrap);
    path("paths.tld_auth_map", paths.tld_auth_map);
    path("paths.blocklist_dir", paths.blocklist_dir);
    path("paths.feed_dir", paths.feed_dir);
    path("paths.state_dir", paths.state_dir);
    path("paths.ct_input", paths.ct_input);
    if (auto v = kv.get("window.start")) window_start = as_date("window.start", *v);
    if (auto v = kv.get("window.end")) window_end = as_date("window.end", *v);
    if (auto v = kv.get("window.slack_days")) slack_days = static_cast<int>(as_int("window.slack_days", *v));
    if (auto v = kv.get("probe.interval_secs")) probe_interval_secs = as_int("probe.interval_secs", *v);
    if (auto v = kv.get("probe.horizon_secs")) probe_horizon_secs = as_int("probe.horizon_secs", *v);
    if (auto v = kv.get("probe.workers")) probe_workers = static_cast<std::size_t>(as_int("probe.workers", *v));
    if (auto v = kv.get("probe.timeout_ms")) dns_timeout_ms = as_int("probe.timeout_ms", *v);
    if (auto v = kv.get("probe.recursive_resolver")) recursive_resolver = *v;
    if (auto v = kv.get("probe.enroll_on")) {
      if (*v != "candidate" && *v != "confirmed") {
        throw Error(ErrorCode::ConfigError, "probe.enroll_on must be \"candidate\" or \"confirmed\"");
      }
      enroll_on_candidate = *v == "candidate";
    }
    if (auto v = kv.get("rdap.rate_per_min")) rdap_rate_per_min = as_double("rdap.rate_per_min", *v);
    if (auto v = kv.get("rdap.concurrency")) rdap_concurrency = static_cast<std::size_t>(as_int("rdap.concurrency", *v));
    if (auto v = kv.get("rdap.fetch_delay_secs")) rdap_fetch_delay_secs = as_int("rdap.fetch_delay_secs", *v);
    if (auto v = kv.get("rdap.reprobe_delay_secs")) rdap_reprobe_delay_secs = as_int("rdap.reprobe_delay_secs", *v);
    if (auto v = kv.get("ingest.include_leaf_certs")) include_leaf_certs = as_bool("ingest.include_leaf_certs", *v);
    if (auto v = kv.get("ingest.include_private_suffixes")) {
      include_private_suffixes = as_bool("ingest.include_private_suffixes", *v);
    }
    if (auto v = kv.get("ingest.approximate_membership")) {
      approximate_membership = as_bool("ingest.approximate_membership", *v);
    }
    if (auto v = kv.get("ingest.websocket_url")) websocket_url = *v;
    if (auto v = kv.get("metrics.enabled")) metrics_enabled = as_bool("metrics.enabled", *v);
    if (auto v = kv.get("metrics.host")) metrics_host = *v;
    if (auto v = kv.get("metrics.port")) metrics_port = static_cast<int>(as_int("metrics.port", *v));
    if (auto v = kv.get("feed.fsync")) feed_fsync = as_bool("feed.fsync", *v);
  }

  void apply_env(const Env& env) {
    if (auto v = env("RDAP_RATE_PER_MIN")) rdap_rate_per_min = as_double("RDAP_RATE_PER_MIN", *v);
    if (auto v = env("RDAP_CONCURRENCY")) rdap_concurrency = static_cast<std::size_t>(as_int("RDAP_CONCURRENCY", *v));
    if (auto v = env("RDAP_BOOTSTRAP_PATH")) paths.rdap_bootstrap = *v;
    if (auto v = env("PROBE_WORKERS")) probe_workers = static_cast<std::size_t>(as_int("PROBE_WORKERS", *v));
    if (auto v = env("PROBE_INTERVAL_SECS")) probe_interval_secs = as_int("PROBE_INTERVAL_SECS", *v);
    if (auto v = env("PROBE_HORIZON_SECS")) probe_horizon_secs = as_int("PROBE_HORIZON_SECS", *v);
    if (auto v = env("TLD_AUTH_MAP_PATH")) paths.tld_auth_map = *v;
    if (auto v = env("DNS_TIMEOUT_MS")) dns_timeout_ms = as_int("DNS_TIMEOUT_MS", *v);
  }

  /// Startup checks: referenced inputs exist and numeric settings are sane.
  void validate() const {
    auto must_exist = [](const char* what, const std::filesystem::path& p) {
      if (p.empty() || !std::filesystem::exists(p)) {
        throw Error(ErrorCode::ConfigError, std::string(what) + " not found: " + p.string());
      }
    };
    must_exist("suffix rules", paths.suffix_rules);
    must_exist("zone directory", paths.zone_dir);
    must_exist("RDAP bootstrap", paths.rdap_bootstrap);
    must_exist("TLD authority map", paths.tld_auth_map);
    if (!paths.blocklist_dir.empty()) must_exist("blocklist directory", paths.blocklist_dir);
    if (!paths.ct_input.empty()) must_exist("CT input", paths.ct_input);
    if (window_end < window_start) throw Error(ErrorCode::ConfigError, "window.end is before window.start");
    if (probe_interval_secs <= 0 || probe_horizon_secs < probe_interval_secs) {
      throw Error(ErrorCode::ConfigError, "probe interval must be positive and not exceed the horizon");
    }
    if (rdap_rate_per_min <= 0) throw Error(ErrorCode::ConfigError, "rdap.rate_per_min must be positive");
    if (probe_workers == 0) throw Error(ErrorCode::ConfigError, "probe.workers must be at least 1");
  }

 private:
  static std::filesystem::path resolve(const std::filesystem::path& base, const std::string& v) {
    const std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
  }
  static std::int64_t as_int(const char* key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const auto n = std::stoll(v, &pos);
      if (pos == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, std::string(key) + ": expected an integer, got '" + v + "'");
  }
  static double as_double(const char* key, const std::string& v) {
    try {
      std::size_t pos = 0;
      const auto n = std::stod(v, &pos);
      if (pos == v.size()) return n;
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigError, std::string(key) + ": expected a number, got '" + v + "'");
  }
  static bool as_bool(const char* key, const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw Error(ErrorCode::ConfigError, std::string(key) + ": expected true or false, got '" + v + "'");
  }
  static Date as_date(const char* key, const std::string& v) {
    try {
      return parse_date(v);
    } catch (const Error&) {
      throw Error(ErrorCode::ConfigError, std::string(key) + ": expected YYYY-MM-DD, got '" + v + "'");
    }
  }
};

}  // namespace darkdns
