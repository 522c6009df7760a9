#include <gtest/gtest.h>

#include <fstream>

#include "darkdns/live.hpp"
#include "darkdns/sim/harness.hpp"
#include "darkdns/sim/mock_dns.hpp"
#include "darkdns/sim/mock_rdap.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using testing_support::kT0;

class LiveTest : public testing::Test {
 protected:
  LiveTest() {
    const auto src = std::filesystem::path(DARKDNS_SOURCE_DIR) / "data";
    cfg_.paths.suffix_rules = src / "public_suffix_list.dat";
    cfg_.paths.rdap_bootstrap = src / "rdap_bootstrap.json";
    cfg_.paths.tld_auth_map = src / "tld_authorities.json";
    cfg_.paths.zone_dir = dir_.path() / "zones";
    cfg_.paths.feed_dir = dir_.path() / "feed";
    cfg_.paths.state_dir = dir_.path() / "state";
    cfg_.paths.ct_input = dir_.path() / "ct.ndjson";
    cfg_.window_start = parse_date("2023-11-01");
    cfg_.window_end = parse_date("2023-11-07");
    cfg_.probe_workers = 1;
    cfg_.dns_timeout_ms = 200;
    cfg_.feed_fsync = false;
    std::filesystem::create_directories(cfg_.paths.zone_dir);
    std::ofstream(cfg_.paths.ct_input).flush();
  }

  std::uint64_t run(const Clock& clock) {
    std::atomic<bool> stop{false};
    LiveOptions opts;
    opts.exit_at_eof = true;
    LiveRunner runner(cfg_, opts, clock, stop);
    return runner.run();
  }

  void append_ct(const std::vector<std::string>& names, Timestamp at) {
    std::ofstream out(cfg_.paths.ct_input, std::ios::app);
    for (const auto& n : names) {
      CertEvent ev;
      ev.seen_at = at;
      ev.names = {n, "www." + n};
      ev.log_id = "test-log";
      out << cert_event_to_json_line(ev) << '\n';
    }
  }

  static ErrorCode code_of(const std::function<void()>& fn, std::string* message = nullptr) {
    try {
      fn();
    } catch (const Error& e) {
      if (message) *message = e.what();
      return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::ParseError;
  }

  testing_support::ScratchDir dir_;
  PipelineConfig cfg_;
};

TEST_F(LiveTest, MissingSuffixFileNamesThePath) {
  cfg_.paths.suffix_rules = dir_.path() / "absent.dat";
  VirtualClock clock(kT0);
  std::string msg;
  EXPECT_EQ(code_of([&] { run(clock); }, &msg), ErrorCode::ConfigError);
  EXPECT_NE(msg.find("absent.dat"), std::string::npos);
}

TEST_F(LiveTest, WebsocketOnlyIsAStartupError) {
  cfg_.paths.ct_input.clear();
  cfg_.websocket_url = "wss://certstream.example/";
  VirtualClock clock(kT0);
  EXPECT_EQ(code_of([&] { run(clock); }), ErrorCode::StartupError);
  cfg_.websocket_url.clear();
  EXPECT_EQ(code_of([&] { run(clock); }), ErrorCode::ConfigError);
}

TEST_F(LiveTest, EmptyInputShutsDownWithCheckpoint) {
  VirtualClock clock(kT0);
  EXPECT_EQ(run(clock), 0u);
  const auto state = StateStore(cfg_.paths.state_dir).load();
  ASSERT_TRUE(state);
  EXPECT_EQ(state->at("ct_offset"), 0);
  EXPECT_TRUE(lifecycles_from_state(*state).empty());
  EXPECT_TRUE(read_feed_lines(cfg_.paths.feed_dir).empty());
}

TEST_F(LiveTest, ResumesFromOffsetWithoutDuplicateRecords) {
  const auto sc = testing_support::hand_scenario();
  sim::World world(sc);
  VirtualClock clock(kT0 + 10min);
  sim::MockRecursive recursive(world, clock);
  sim::MockAuthoritative authority(world, clock, "com");
  dns::DnsSocketServer rec_server(recursive);
  dns::DnsSocketServer auth_server(authority);
  sim::MockRdapService rdap(world, clock);
  sim::MockRdapServer rdap_server(rdap);

  RdapBootstrap boot;
  boot.add("com", rdap_server.base_url("com"));
  std::ofstream(dir_.path() / "bootstrap.json") << boot.to_json_text();
  TldAuthorityMap auth;
  auth.add("com", auth_server.endpoint());
  std::ofstream(dir_.path() / "auth.json") << auth.to_json_text();
  cfg_.paths.rdap_bootstrap = dir_.path() / "bootstrap.json";
  cfg_.paths.tld_auth_map = dir_.path() / "auth.json";
  cfg_.recursive_resolver = rec_server.endpoint().to_string();
  cfg_.rdap_rate_per_min = 6000;
  std::filesystem::create_directories(cfg_.paths.zone_dir / "com");
  std::ofstream(zone_file_path(cfg_.paths.zone_dir, "com", parse_date("2023-10-01")))
      << "$ORIGIN com.\nolder 172800 IN NS ns1.example.net.\n";

  append_ct({"live.com", "brief.com"}, kT0 + 5min);
  EXPECT_EQ(run(clock), 2u);
  const auto first = read_feed_lines(cfg_.paths.feed_dir);
  EXPECT_EQ(authority.hits().count("live.com", dns::type::NS), 1u);

  append_ct({"live.com", "lagging.com"}, kT0 + 8min);
  clock.set(kT0 + 20min);
  EXPECT_EQ(run(clock), 2u);
  EXPECT_EQ(run(clock), 0u);

  const auto lines = read_feed_lines(cfg_.paths.feed_dir);
  ASSERT_GE(lines.size(), first.size());
  EXPECT_TRUE(std::equal(first.begin(), first.end(), lines.begin()));
  std::set<std::pair<std::string, FeedEvent>> seen;
  std::set<std::string> detected;
  for (const auto& l : lines) {
    const auto r = FeedRecord::parse(l);
    EXPECT_TRUE(seen.insert({r.domain, r.event}).second) << l;
    if (r.event == FeedEvent::NrdDetected) detected.insert(r.domain);
  }
  EXPECT_EQ(detected, (std::set<std::string>{"brief.com", "lagging.com", "live.com"}));

  const auto lcs = lifecycles_from_state(*StateStore(cfg_.paths.state_dir).load());
  ASSERT_EQ(lcs.size(), 3u);
  for (const auto& lc : lcs) {
    if (lc.domain.full() == "live.com") EXPECT_EQ(lc.state, LifecycleState::ConfirmedNrd);
  }
  EXPECT_EQ(rdap.hits("live.com"), 1u);
}

}  // namespace
}  // namespace darkdns
