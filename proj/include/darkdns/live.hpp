#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "darkdns/checkpoint.hpp"
#include "darkdns/clock.hpp"
#include "darkdns/config.hpp"
#include "darkdns/ct_ingest.hpp"
#include "darkdns/dns/resolver.hpp"
#include "darkdns/dns/transport.hpp"
#include "darkdns/feed.hpp"
#include "darkdns/http.hpp"
#include "darkdns/metrics.hpp"
#include "darkdns/pipeline.hpp"
#include "darkdns/probe.hpp"
#include "darkdns/rate_limiter.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/zone_store.hpp"

namespace darkdns {

using LogFn = std::function<void(const std::string&)>;

/// Zone files laid out as <zone_dir>/<tld>/<YYYY-MM-DD>.zone, sorted by date then TLD.
inline std::vector<std::pair<std::string, Date>> list_zone_files(const std::filesystem::path& dir) {
  std::vector<std::pair<std::string, Date>> out;
  if (!std::filesystem::is_directory(dir)) return out;
  for (const auto& tld_dir : std::filesystem::directory_iterator(dir)) {
    if (!tld_dir.is_directory()) continue;
    for (const auto& f : std::filesystem::directory_iterator(tld_dir.path())) {
      if (f.path().extension() != ".zone") continue;
      try {
        out.emplace_back(tld_dir.path().filename().string(), parse_date(f.path().stem().string()));
      } catch (const Error&) {
      }
    }
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  return out;
}

inline std::filesystem::path zone_file_path(const std::filesystem::path& dir, const std::string& tld, Date d) {
  return dir / tld / (format_date(d) + ".zone");
}

/// Reads complete lines appended to a file since the last call.
class LineFollower {
 public:
  explicit LineFollower(std::filesystem::path path, std::uint64_t offset = 0) : path_(std::move(path)), offset_(offset) {}

  std::vector<std::string> poll(std::size_t max_lines) {
    std::vector<std::string> out;
    std::ifstream in(path_, std::ios::binary);
    if (!in) return out;
    in.seekg(static_cast<std::streamoff>(offset_));
    std::string line;
    while (out.size() < max_lines && std::getline(in, line)) {
      if (in.eof()) break;  // partial line without a newline yet
      offset_ += line.size() + 1;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) out.push_back(std::move(line));
    }
    at_eof_ = out.size() < max_lines;
    return out;
  }

  std::uint64_t offset() const { return offset_; }
  bool at_eof() const { return at_eof_; }

 private:
  std::filesystem::path path_;
  std::uint64_t offset_;
  bool at_eof_ = false;
};

struct LiveOptions {
  /// Stop once the CT input is exhausted instead of following it.
  bool exit_at_eof = false;
  Duration checkpoint_every = std::chrono::seconds(60);
  Duration zone_poll_every = std::chrono::seconds(300);
  std::size_t batch = 1000;
};

/// Live mode: follows an NDJSON CT stream, loads zone files as they appear and
/// runs the pipeline against real DNS and RDAP endpoints. State is
/// checkpointed periodically and on shutdown.
class LiveRunner {
 public:
  LiveRunner(PipelineConfig cfg, LiveOptions opts, const Clock& clock, std::atomic<bool>& stop, LogFn log = {})
      : cfg_(std::move(cfg)), opts_(opts), clock_(clock), stop_(stop), log_(std::move(log)) {}

  /// Returns the number of CT lines consumed in this run.
  std::uint64_t run() {
    cfg_.validate();
    if (cfg_.paths.ct_input.empty()) {
      if (!cfg_.websocket_url.empty()) {
        throw Error(ErrorCode::StartupError, "ingest.websocket_url is set but this build reads CT events from files only; "
                                             "point paths.ct_input at an NDJSON file or FIFO fed by a stream client");
      }
      throw Error(ErrorCode::ConfigError, "paths.ct_input is not set");
    }
    if (cfg_.paths.feed_dir.empty()) throw Error(ErrorCode::ConfigError, "paths.feed_dir is not set");
    if (cfg_.paths.state_dir.empty()) throw Error(ErrorCode::ConfigError, "no state directory configured");

    const auto rules = SuffixRuleSet::load(cfg_.paths.suffix_rules, {cfg_.include_private_suffixes});
    ZoneStore zones(cfg_.approximate_membership ? MembershipMode::Approximate : MembershipMode::Exact);
    HttplibTransport http(std::chrono::milliseconds(10000));
    EndpointRateLimiter limiter(cfg_.rdap_rate_per_min, 1.0);
    RdapClient rdap(RdapBootstrap::load(cfg_.paths.rdap_bootstrap), http, limiter, clock_);
    dns::UdpDnsTransport udp;
    dns::QueryIdSource ids;
    dns::StubResolver stub(udp, dns::Endpoint::parse(cfg_.recursive_resolver),
                           std::chrono::milliseconds(cfg_.dns_timeout_ms), ids);
    dns::CachingResolver cache(stub, clock_);
    ProbeConfig pc;
    pc.interval = Duration{cfg_.probe_interval_secs};
    pc.horizon = Duration{cfg_.probe_horizon_secs};
    pc.workers = cfg_.probe_workers;
    pc.timeout = std::chrono::milliseconds(cfg_.dns_timeout_ms);
    ProbeScheduler probes(pc, clock_, cache, udp, TldAuthorityMap::load(cfg_.paths.tld_auth_map), ids);
    RotatingFileSink sink(cfg_.paths.feed_dir, cfg_.feed_fsync);
    FeedWriter feed(sink);
    feed.rebuild(read_feed_lines(cfg_.paths.feed_dir));
    Metrics metrics;
    std::unique_ptr<MetricsServer> metrics_server;
    if (cfg_.metrics_enabled) {
      metrics_server = std::make_unique<MetricsServer>(metrics, cfg_.metrics_host, cfg_.metrics_port);
      log("metrics on " + cfg_.metrics_host + ":" + std::to_string(metrics_server->port()));
    }

    PipelineOptions po;
    po.window = AnalysisWindow(cfg_.window_start, cfg_.window_end, std::chrono::hours(24 * cfg_.slack_days));
    po.fetch_delay = Duration{cfg_.rdap_fetch_delay_secs};
    po.reprobe_delay = Duration{cfg_.rdap_reprobe_delay_secs};
    po.enroll_on_candidate = cfg_.enroll_on_candidate;
    po.include_leaf_certs = cfg_.include_leaf_certs;
    Pipeline pipeline(po, rules, zones, rdap, probes, feed, clock_, metrics);

    StateStore store(cfg_.paths.state_dir);
    std::uint64_t offset = 0;
    if (const auto state = store.load()) {
      try {
        offset = state->at("ct_offset").get<std::uint64_t>();
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::CorruptCheckpoint, std::string("state file: ") + e.what());
      }
      load_zones(zones, pipeline, false);
      pipeline.restore(state->at("pipeline"));
      log("resumed from checkpoint at CT offset " + std::to_string(offset));
    }
    load_zones(zones, pipeline, true);

    LineFollower follower(cfg_.paths.ct_input, offset);
    auto save = [&] {
      store.save({{"pipeline", pipeline.checkpoint()}, {"ct_offset", follower.offset()}});
      last_checkpoint_ = clock_.now();
    };
    last_checkpoint_ = clock_.now();
    Timestamp last_zone_poll = clock_.now();
    std::uint64_t consumed = 0;
    const Timestamp close_at = start_of(cfg_.window_end) + std::chrono::hours(24) + po.window.slack;

    while (!stop_.load()) {
      const auto lines = follower.poll(opts_.batch);
      for (const auto& line : lines) {
        try {
          pipeline.on_cert_event(parse_cert_event(line));
        } catch (const Error& e) {
          if (e.code() != ErrorCode::MalformedEvent) throw;
          pipeline.on_malformed_event();
        }
        ++consumed;
      }
      const Timestamp now = clock_.now();
      if (now - last_zone_poll >= opts_.zone_poll_every) {
        load_zones(zones, pipeline, true);
        last_zone_poll = now;
      }
      pipeline.run_due();
      if (!pipeline.window_closed() && now >= close_at) pipeline.close_window();
      if (now - last_checkpoint_ >= opts_.checkpoint_every) save();
      if (opts_.exit_at_eof && follower.at_eof()) break;
      if (lines.empty()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    save();
    log("checkpoint written; " + std::to_string(consumed) + " CT events consumed");
    return consumed;
  }

 private:
  void log(const std::string& msg) const {
    if (log_) log_(msg);
  }

  /// Loads zone files not yet in the store; with `notify`, new ones are passed
  /// to the pipeline.
  void load_zones(ZoneStore& zones, Pipeline& pipeline, bool notify) {
    for (const auto& [tld, date] : list_zone_files(cfg_.paths.zone_dir)) {
      if (!zones.has_snapshot(tld, date)) {
        zones.load_snapshot(zone_file_path(cfg_.paths.zone_dir, tld, date), tld, date, clock_.now());
        log("loaded zone ." + tld + " " + format_date(date));
      }
      if (notify) pipeline.on_snapshot(tld, date);
    }
  }

  PipelineConfig cfg_;
  LiveOptions opts_;
  const Clock& clock_;
  std::atomic<bool>& stop_;
  LogFn log_;
  Timestamp last_checkpoint_;
};

/// Lifecycles recorded in a state file written by the live runner.
inline std::vector<DomainLifecycle> lifecycles_from_state(const nlohmann::json& state) {
  try {
    const auto& p = state.contains("pipeline") ? state.at("pipeline") : state;
    std::vector<DomainLifecycle> out;
    for (const auto& lj : p.at("archived")) out.push_back(lifecycle_from_json(lj));
    for (const auto& lj : p.at("active")) out.push_back(lifecycle_from_json(lj));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptCheckpoint, std::string("state file: ") + e.what());
  }
}

}  // namespace darkdns
