#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"

#include "darkdns/darkdns.hpp"
#include "darkdns/live.hpp"
#include "darkdns/sim/harness.hpp"

namespace fs = std::filesystem;
using namespace darkdns;

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

struct Globals {
  std::string config;
  std::string state_dir;
  std::string log_level = "info";
};

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::ConfigError, "cannot write " + path);
  out << text;
}

PipelineConfig load_config(const Globals& g) {
  auto cfg = PipelineConfig::load(g.config.empty() ? std::nullopt : std::optional<fs::path>(g.config));
  if (!g.state_dir.empty()) cfg.paths.state_dir = g.state_dir;
  return cfg;
}

/// Lifecycles and window either from a simulated scenario or from a state file.
struct LifecycleSource {
  std::string scenario;

  std::pair<std::vector<DomainLifecycle>, AnalysisWindow> load(const Globals& g) const {
    if (!scenario.empty()) {
      const auto sc = sim::load_scenario(scenario);
      spdlog::info("simulating scenario seed {} ({} domains)", sc.seed, sc.domains.size());
      auto rep = sim::run_end_to_end(sc);
      return {std::move(rep.lifecycles), sc.window};
    }
    const auto cfg = load_config(g);
    if (cfg.paths.state_dir.empty()) throw Error(ErrorCode::ConfigError, "give --scenario or a state directory");
    const auto state = StateStore(cfg.paths.state_dir).load();
    if (!state) throw Error(ErrorCode::ConfigError, "no checkpoint in " + cfg.paths.state_dir.string());
    return {lifecycles_from_state(*state),
            AnalysisWindow(cfg.window_start, cfg.window_end, std::chrono::hours(24 * cfg.slack_days))};
  }
};

std::vector<DomainLifecycle> final_transients(const std::vector<DomainLifecycle>& all, const AnalysisWindow& w) {
  std::vector<DomainLifecycle> out;
  for (const auto& lc : all) {
    if (is_final_transient(lc, w)) out.push_back(lc);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"darkdns: newly registered and transient domain detection"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "Pipeline configuration file (TOML subset)");
  app.add_option("--state-dir", g.state_dir, "Checkpoint directory (overrides the config)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  // sim
  auto* sim_cmd = app.add_subcommand("sim", "Run a scenario end to end against mock services");
  std::string sim_scenario, sim_report, sim_feed_dir, sim_transport = "inprocess";
  std::size_t sim_workers = 1;
  sim_cmd->add_option("--scenario", sim_scenario, "Scenario JSON")->required();
  sim_cmd->add_option("--report", sim_report, "Write the JSON report here");
  sim_cmd->add_option("--feed-dir", sim_feed_dir, "Write feed files here");
  sim_cmd->add_option("--transport", sim_transport, "inprocess or loopback")
      ->check(CLI::IsMember({"inprocess", "loopback"}));
  sim_cmd->add_option("--workers", sim_workers, "Probe worker threads");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Write a synthetic scenario");
  std::uint64_t gen_seed = 1;
  sim::GenerateParams gp;
  std::string gen_out = "-", gen_certs, gen_zone_dir;
  gen_cmd->add_option("--seed", gen_seed);
  gen_cmd->add_option("--n-domains", gp.n_domains);
  gen_cmd->add_option("--transient-fraction", gp.transient_fraction);
  gen_cmd->add_option("--early-removed-fraction", gp.early_removed_fraction);
  gen_cmd->add_option("--cert-coverage", gp.cert_coverage);
  gen_cmd->add_option("--sync-delay-fraction", gp.rdap_failure_mix.sync_delay);
  gen_cmd->add_option("--post-deletion-fraction", gp.rdap_failure_mix.post_deletion);
  gen_cmd->add_option("--late-snapshot-fraction", gp.snapshot_lateness.fraction);
  gen_cmd->add_option("--late-snapshot-max-days", gp.snapshot_lateness.max_days);
  gen_cmd->add_option("--window-start", gp.window_start);
  gen_cmd->add_option("--window-days", gp.window_days);
  gen_cmd->add_option("--out", gen_out, "Scenario JSON path (default stdout)");
  gen_cmd->add_option("--certs", gen_certs, "Also write the CT stream as NDJSON");
  gen_cmd->add_option("--zone-dir", gen_zone_dir, "Also write daily zone files");

  // run
  auto* run_cmd = app.add_subcommand("run", "Live mode");
  bool run_exit_at_eof = false;
  run_cmd->add_flag("--exit-at-eof", run_exit_at_eof, "Stop when the CT input is exhausted");

  // coverage
  auto* cov_cmd = app.add_subcommand("coverage", "Coverage of CT-detected NRDs against zone-diff NRDs");
  std::string cov_counts, cov_out = "-";
  cov_cmd->add_option("--counts", cov_counts, "CSV of tld,detected,zone_nrd")->required()->check(CLI::ExistingFile);
  cov_cmd->add_option("--out", cov_out);

  // compare-feeds
  auto* cmp_cmd = app.add_subcommand("compare-feeds", "Overlap of two feeds");
  std::string cmp_a, cmp_b, cmp_event, cmp_date, cmp_out = "-";
  cmp_cmd->add_option("a", cmp_a, "Feed file or directory")->required()->check(CLI::ExistingPath);
  cmp_cmd->add_option("b", cmp_b, "Feed file or directory")->required()->check(CLI::ExistingPath);
  cmp_cmd->add_option("--event", cmp_event, "Only domains with this event");
  cmp_cmd->add_option("--registration-date", cmp_date, "Only domains registered on this date");
  cmp_cmd->add_option("--out", cmp_out);

  // export-cdf
  auto* cdf_cmd = app.add_subcommand("export-cdf", "Detection-lag CDF as CSV (x in minutes)");
  LifecycleSource cdf_src;
  int cdf_resolution = 1;
  std::string cdf_out = "-";
  cdf_cmd->add_option("--scenario", cdf_src.scenario);
  cdf_cmd->add_option("--resolution-minutes", cdf_resolution)->check(CLI::PositiveNumber);
  cdf_cmd->add_option("--out", cdf_out);

  // export-lifetimes
  auto* life_cmd = app.add_subcommand("export-lifetimes", "Transient lifetime histogram as CSV (x in hours)");
  LifecycleSource life_src;
  std::string life_out = "-";
  life_cmd->add_option("--scenario", life_src.scenario);
  life_cmd->add_option("--out", life_out);

  // registrars
  auto* reg_cmd = app.add_subcommand("registrars", "Registrar distribution of transient domains");
  LifecycleSource reg_src;
  std::size_t reg_top = 10;
  std::string reg_out = "-";
  reg_cmd->add_option("--scenario", reg_src.scenario);
  reg_cmd->add_option("--top", reg_top);
  reg_cmd->add_option("--out", reg_out);

  // blocklist-report
  auto* bl_cmd = app.add_subcommand("blocklist-report", "First blocklist flag relative to each lifecycle");
  LifecycleSource bl_src;
  std::string bl_dir, bl_out = "-";
  bl_cmd->add_option("--scenario", bl_src.scenario);
  bl_cmd->add_option("--blocklist-dir", bl_dir, "<dir>/<list>/<YYYY-MM-DD>.txt (defaults to the config)");
  bl_cmd->add_option("--out", bl_out);

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_default_logger(spdlog::stderr_color_mt("darkdns"));
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (*sim_cmd) {
      const auto sc = sim::load_scenario(sim_scenario);
      sim::HarnessOptions opts;
      opts.transport = sim_transport == "loopback" ? sim::MockTransport::Loopback : sim::MockTransport::InProcess;
      opts.probe_workers = sim_workers;
      if (!sim_feed_dir.empty()) opts.feed_dir = sim_feed_dir;
      const auto rep = sim::run_end_to_end(sc, opts);
      std::cout << rep.summary();
      if (!sim_report.empty()) write_output(sim_report, rep.to_json().dump(2) + "\n");
      return rep.mismatches().empty() ? 0 : 1;
    }
    if (*gen_cmd) {
      const auto sc = sim::generate(gen_seed, gp);
      write_output(gen_out, sim::to_json(sc).dump(1) + "\n");
      if (!gen_certs.empty()) write_output(gen_certs, sim::cert_stream_ndjson(sc));
      if (!gen_zone_dir.empty()) {
        for (const auto& s : sc.snapshots) {
          const auto path = zone_file_path(gen_zone_dir, s.tld, s.date);
          fs::create_directories(path.parent_path());
          std::ofstream out(path);
          out << "$ORIGIN " << s.tld << ".\n";
          for (const auto& label : sim::snapshot_labels(sc, s.tld, s.date)) {
            out << label << " 172800 IN NS ns1.example.net.\n";
          }
        }
      }
      spdlog::info("scenario seed {}: {} domains, {} certificates, {} snapshots", sc.seed, sc.domains.size(),
                   sc.certs.size(), sc.snapshots.size());
      return 0;
    }
    if (*run_cmd) {
      std::signal(SIGTERM, on_signal);
      std::signal(SIGINT, on_signal);
      LiveOptions lo;
      lo.exit_at_eof = run_exit_at_eof;
      SystemClock clock;
      LiveRunner runner(load_config(g), lo, clock, g_stop, [](const std::string& m) { spdlog::info("{}", m); });
      runner.run();
      return 0;
    }
    if (*cov_cmd) {
      std::ifstream in(cov_counts);
      const auto rep = coverage_from_counts(parse_coverage_counts(in));
      write_output(cov_out, rep.to_csv());
      return 0;
    }
    if (*cmp_cmd) {
      FeedFilter f;
      if (!cmp_event.empty()) f.event = feed_event_from_string(cmp_event);
      if (!cmp_date.empty()) f.registration_date = parse_date(cmp_date);
      write_output(cmp_out, compare_feeds(cmp_a, cmp_b, f).to_json().dump(2) + "\n");
      return 0;
    }
    if (*cdf_cmd) {
      const auto [all, window] = cdf_src.load(g);
      const auto cdf = detection_lag_cdf(all, std::chrono::minutes(cdf_resolution));
      spdlog::info("{} confirmed lifecycles; CDF at 45 min = {:.4f}", confirmed_lags(all).size(),
                   cdf_at(cdf, std::chrono::minutes(45)));
      write_output(cdf_out, cdf_to_csv(cdf));
      return 0;
    }
    if (*life_cmd) {
      const auto [all, window] = life_src.load(g);
      const auto rep = lifetimes_of(final_transients(all, window));
      std::vector<Duration> values;
      for (const auto& [d, v] : rep.lifetimes) values.push_back(v);
      if (!values.empty()) {
        spdlog::info("{} transients, median lifetime {} min, {} without probe data", values.size(),
                     std::chrono::duration_cast<std::chrono::minutes>(median(values)).count(),
                     rep.missing_probe_data.size());
      }
      write_output(life_out, histogram_to_csv(histogram(values)));
      return 0;
    }
    if (*reg_cmd) {
      const auto [all, window] = reg_src.load(g);
      write_output(reg_out, registrar_table_csv(registrar_distribution(final_transients(all, window), reg_top)));
      return 0;
    }
    if (*bl_cmd) {
      const auto [all, window] = bl_src.load(g);
      BlocklistStore store;
      if (!bl_src.scenario.empty() && bl_dir.empty()) {
        store = sim::scenario_blocklists(sim::load_scenario(bl_src.scenario));
      } else {
        const auto cfg = load_config(g);
        const fs::path dir = bl_dir.empty() ? cfg.paths.blocklist_dir : fs::path(bl_dir);
        store.load_directory(dir, SuffixRuleSet::load(cfg.paths.suffix_rules));
      }
      const auto rep = correlate(all, store);
      spdlog::info("{} flagged: {} before registration, {} while active, {} after deletion", rep.summary.total(),
                   rep.summary.before_registration, rep.summary.while_active, rep.summary.post_deletion);
      write_output(bl_out, rep.to_csv());
      return 0;
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return e.code() == ErrorCode::ConfigError || e.code() == ErrorCode::StartupError ? 2 : 1;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
