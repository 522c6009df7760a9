#pragma once

#include <unistd.h>

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "darkdns/sim/scenario.hpp"

namespace darkdns::testing_support {

inline const Timestamp kT0 = parse_rfc3339("2023-11-02T10:00:00Z");

/// A one-TLD script with hand-placed domains, for unit tests of the mocks.
inline sim::Scenario hand_scenario() {
  sim::Scenario sc;
  sc.params.tlds = {"com"};
  sc.window = AnalysisWindow(parse_date("2023-11-01"), parse_date("2023-11-07"));
  auto add = [&](std::string name, Timestamp reg, std::optional<Timestamp> del) -> sim::DomainTimeline& {
    sim::DomainTimeline t;
    t.name = std::move(name);
    t.registration_ts = reg;
    t.deletion_ts = del;
    t.ns_sets = {{reg, {"ns1.host.net", "ns2.host.net"}}};
    t.registrar_name = "Example Registrar, Inc.";
    t.registrar_iana_id = 9999;
    sc.domains.push_back(std::move(t));
    return sc.domains.back();
  };
  add("live.com", kT0, std::nullopt);
  add("brief.com", kT0, kT0 + std::chrono::hours(3));
  add("lagging.com", kT0, std::nullopt).rdap_sync_delay = std::chrono::hours(5);
  add("purged.com", kT0, kT0 + std::chrono::hours(1)).rdap_purge_on_delete = true;
  add("parked.com", kT0, std::nullopt).delegated = false;
  return sc;
}

class ScratchDir {
 public:
  ScratchDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = std::filesystem::temp_directory_path() /
            ("darkdns-" + std::string(info->test_suite_name()) + "-" + info->name() + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() { std::filesystem::remove_all(path_); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace darkdns::testing_support
