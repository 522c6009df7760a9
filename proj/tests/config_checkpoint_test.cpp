#include <gtest/gtest.h>

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "httplib.h"

#include "darkdns/checkpoint.hpp"
#include "darkdns/config.hpp"
#include "darkdns/metrics.hpp"
#include "darkdns/rate_limiter.hpp"
#include "darkdns/worker_pool.hpp"

namespace darkdns {
namespace {

namespace fs = std::filesystem;

class TempDir : public testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("darkdns-" + std::string(testing::UnitTest::GetInstance()->current_test_info()->name()) + "-" +
            std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

PipelineConfig::Env no_env() {
  return [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
}

TEST(KeyValue, SectionsStringsAndComments) {
  std::istringstream in(R"(
# top comment
[paths]
zone_dir = "zones dir # not a comment"   # trailing
[probe]
interval_secs = 300
)");
  const auto kv = KeyValueConfig::parse(in);
  EXPECT_EQ(kv.get("paths.zone_dir"), "zones dir # not a comment");
  EXPECT_EQ(kv.get("probe.interval_secs"), "300");
  EXPECT_EQ(kv.get("probe.missing"), std::nullopt);
}

TEST(KeyValue, SyntaxErrorsNameTheLine) {
  std::istringstream in("[ok]\nno equals sign\n");
  try {
    KeyValueConfig::parse(in, "cfg.toml");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find("cfg.toml:2"), std::string::npos);
  }
}

TEST_F(TempDir, FileThenEnvironmentOverrides) {
  std::ofstream(dir_ / "darkdns.toml") << "[paths]\nzone_dir = \"z\"\n[rdap]\nrate_per_min = 6\n[probe]\nenroll_on = \"confirmed\"\n";
  const auto env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "RDAP_RATE_PER_MIN") return "8";
    if (k == "PROBE_WORKERS") return "3";
    return std::nullopt;
  };
  const auto cfg = PipelineConfig::load(dir_ / "darkdns.toml", env);
  EXPECT_EQ(cfg.paths.zone_dir, dir_ / "z");
  EXPECT_DOUBLE_EQ(cfg.rdap_rate_per_min, 8.0);
  EXPECT_EQ(cfg.probe_workers, 3u);
  EXPECT_FALSE(cfg.enroll_on_candidate);
  EXPECT_EQ(cfg.probe_interval_secs, 600);
  EXPECT_EQ(cfg.probe_horizon_secs, 48 * 3600);
}

TEST_F(TempDir, BadValuesAreConfigErrors) {
  for (const std::string body : {"[probe]\nworkers = many\n", "[feed]\nfsync = yes\n", "[window]\nstart = 11/01\n",
                                 "[probe]\nenroll_on = \"never\"\n"}) {
    std::ofstream(dir_ / "bad.toml") << body;
    try {
      PipelineConfig::load(dir_ / "bad.toml", no_env());
      ADD_FAILURE() << body;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << body;
    }
  }
  EXPECT_THROW(PipelineConfig::load(dir_ / "absent.toml", no_env()), Error);
}

TEST_F(TempDir, ValidateNamesMissingPaths) {
  PipelineConfig cfg;
  cfg.paths.suffix_rules = dir_ / "nope.dat";
  try {
    cfg.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ConfigError);
    EXPECT_NE(std::string(e.what()).find((dir_ / "nope.dat").string()), std::string::npos);
  }
}

TEST_F(TempDir, StateRoundTripAndAtomicReplace) {
  StateStore s(dir_ / "state");
  EXPECT_EQ(s.load(), std::nullopt);
  s.save({{"cursor", 10}});
  s.save({{"cursor", 42}, {"list", {1, 2, 3}}});
  const auto j = s.load();
  ASSERT_TRUE(j);
  EXPECT_EQ((*j)["cursor"], 42);
  EXPECT_FALSE(fs::exists(dir_ / "state" / "state.json.tmp"));
}

TEST_F(TempDir, CorruptStateDetected) {
  StateStore s(dir_);
  s.save({{"cursor", 42}});
  std::string text;
  {
    std::ifstream in(s.path());
    text.assign(std::istreambuf_iterator<char>(in), {});
  }
  const auto flip = text.find("42");
  for (const auto& mutated : {text.substr(0, text.size() - 3), text.replace(flip, 2, "43"), std::string("garbage\n")}) {
    std::ofstream(s.path(), std::ios::trunc) << mutated;
    try {
      s.load();
      ADD_FAILURE() << mutated;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::CorruptCheckpoint);
    }
  }
}

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
}

TEST(TokenBucketTest, SteadyRateWithBurstOfOne) {
  TokenBucket b(10.0);
  const auto t0 = from_epoch(1000);
  EXPECT_TRUE(b.try_acquire(t0));
  EXPECT_FALSE(b.try_acquire(t0));
  EXPECT_EQ(b.next_available(t0), t0 + std::chrono::seconds(6));
  EXPECT_FALSE(b.try_acquire(t0 + std::chrono::seconds(5)));
  EXPECT_TRUE(b.try_acquire(t0 + std::chrono::seconds(6)));
  // Long idle periods do not bank more than one token.
  const auto later = t0 + std::chrono::hours(1);
  EXPECT_TRUE(b.try_acquire(later));
  EXPECT_FALSE(b.try_acquire(later));
  EXPECT_THROW(TokenBucket(0.0), Error);
}

TEST(TokenBucketTest, NeverExceedsRateInAnyMinute) {
  EndpointRateLimiter lim(10.0);
  std::vector<std::int64_t> grants;
  for (std::int64_t s = 0; s < 3600; ++s) {
    for (int k = 0; k < 3; ++k) {
      if (lim.try_acquire("https://rdap.a/", from_epoch(s))) grants.push_back(s);
    }
  }
  std::size_t lo = 0, peak = 0;
  for (std::size_t hi = 0; hi < grants.size(); ++hi) {
    while (grants[hi] - grants[lo] >= 60) ++lo;
    peak = std::max(peak, hi - lo + 1);
  }
  EXPECT_LE(peak, 10u);
  EXPECT_EQ(grants.size(), 600u);
  EXPECT_TRUE(lim.try_acquire("https://rdap.b/", from_epoch(1)));
}

TEST(TokenBucketTest, StateSurvivesRestore) {
  EndpointRateLimiter a(10.0);
  a.try_acquire("e", from_epoch(100));
  EndpointRateLimiter b(10.0);
  b.restore(a.to_json());
  EXPECT_FALSE(b.try_acquire("e", from_epoch(101)));
  EXPECT_TRUE(b.try_acquire("e", from_epoch(106)));
}

TEST(MetricsTest, CountersRenderAndRestoreMonotonically) {
  Metrics m;
  m.add("b");
  m.add("a", 5);
  EXPECT_EQ(m.render(), "a 5\nb 1\n");
  m.restore({{"a", 3}, {"c", 7}});
  EXPECT_EQ(m.get("a"), 5u);
  EXPECT_EQ(m.get("c"), 7u);
}

TEST(MetricsTest, ServedOverHttp) {
  Metrics m;
  m.add("events", 3);
  MetricsServer server(m, "127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", server.port());
  const auto res = cli.Get("/metrics");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "events 3\n");
}

TEST(WorkerPoolTest, RunsEveryIndexAndPropagatesErrors) {
  WorkerPool pool(4);
  std::vector<std::atomic<int>> hits(1000);
  pool.parallel_for(hits.size(), [&](std::size_t i) { hits[i]++; });
  for (auto& h : hits) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(pool.parallel_for(10, [](std::size_t i) {
    if (i == 7) throw Error(ErrorCode::InvalidParams, "boom");
  }),
               Error);
}

}  // namespace
}  // namespace darkdns
