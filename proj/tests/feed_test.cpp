#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "darkdns/feed.hpp"
#include "test_support.hpp"

namespace darkdns {
namespace {

using namespace std::chrono_literals;
using testing_support::kT0;

FeedRecord rec(const std::string& domain, FeedEvent e, Timestamp at, std::optional<std::int64_t> lag = std::nullopt) {
  FeedRecord r;
  r.domain = domain;
  r.event = e;
  r.at = at;
  r.detection_lag_secs = lag;
  return r;
}

TEST(FeedRecord, JsonLineShapeAndParse) {
  auto r = rec("a.com", FeedEvent::NrdDetected, kT0, 300);
  r.registrar_name = "Reg";
  const auto line = r.to_json_line();
  EXPECT_EQ(line,
            R"({"domain":"a.com","event":"NRD_DETECTED","at":"2023-11-02T10:00:00Z","registrar_name":"Reg","detection_lag_secs":300})");
  const auto back = FeedRecord::parse(line);
  EXPECT_EQ(back.domain, "a.com");
  EXPECT_EQ(back.detection_lag_secs, 300);
  EXPECT_EQ(FeedRecord::parse(rec("b.com", FeedEvent::Transient, kT0).to_json_line()).registrar_name, std::nullopt);
  EXPECT_THROW(FeedRecord::parse("[1]"), Error);
  EXPECT_THROW(FeedRecord::parse(R"({"domain":"a.com","event":"NOPE","at":"2023-11-02T10:00:00Z"})"), Error);
  for (const auto e : {FeedEvent::NrdDetected, FeedEvent::Confirmed, FeedEvent::Transient, FeedEvent::EarlyRemoved,
                       FeedEvent::InZone}) {
    EXPECT_EQ(feed_event_from_string(to_string(e)), e);
  }
}

TEST(FeedWriter, ExactlyOncePerGeneration) {
  MemorySink sink;
  FeedWriter w(sink);
  const auto r = rec("a.com", FeedEvent::Transient, kT0);
  EXPECT_TRUE(w.emit(r));
  EXPECT_FALSE(w.emit(r));
  EXPECT_TRUE(w.emit(rec("a.com", FeedEvent::Confirmed, kT0)));
  EXPECT_TRUE(w.emit(r, 1));
  EXPECT_FALSE(w.emit(r, 1));
  EXPECT_EQ(w.written(), 3u);
  EXPECT_EQ(w.suppressed(), 2u);

  FeedWriter replay(sink);
  replay.rebuild(sink.lines());
  EXPECT_FALSE(replay.emit(r, 1));
  EXPECT_TRUE(replay.emit(r, 2));
}

class FlakySink final : public FeedSink {
 public:
  explicit FlakySink(int failures) : failures_(failures) {}
  void append(const FeedRecord&, const std::string& line) override {
    if (failures_-- > 0) throw Error(ErrorCode::SinkUnavailable, "down");
    lines.push_back(line);
  }
  std::vector<std::string> lines;

 private:
  int failures_;
};

TEST(FeedWriter, RetriesWithExponentialBackoff) {
  FlakySink sink(3);
  std::vector<std::chrono::milliseconds> sleeps;
  FeedWriter w(sink, [&](std::chrono::milliseconds d) { sleeps.push_back(d); }, 5, 100ms);
  EXPECT_TRUE(w.emit(rec("a.com", FeedEvent::InZone, kT0)));
  EXPECT_EQ(sleeps, (std::vector<std::chrono::milliseconds>{100ms, 200ms, 400ms}));
  EXPECT_EQ(sink.lines.size(), 1u);
  EXPECT_EQ(w.retries(), 3u);

  FlakySink dead(10);
  FeedWriter gives_up(dead, [](std::chrono::milliseconds) {}, 3);
  const auto r = rec("b.com", FeedEvent::InZone, kT0);
  EXPECT_THROW(gives_up.emit(r), Error);
  EXPECT_EQ(gives_up.written(), 0u);
}

TEST(RotatingFileSink, OneFilePerRecordDay) {
  testing_support::ScratchDir dir;
  {
    RotatingFileSink sink(dir.path() / "feed", false);
    FeedWriter w(sink);
    w.emit(rec("a.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-02T23:59:59Z")));
    w.emit(rec("b.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-03T00:00:00Z")));
    w.emit(rec("c.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-02T12:00:00Z")));
  }
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "feed" / "feed-2023-11-02.ndjson"));
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "feed" / "feed-2023-11-03.ndjson"));
  const auto lines = read_feed_lines(dir.path() / "feed");
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(FeedRecord::parse(lines[0]).domain, "a.com");
  EXPECT_EQ(FeedRecord::parse(lines[1]).domain, "c.com");
  EXPECT_EQ(FeedRecord::parse(lines[2]).domain, "b.com");
}

TEST(CompareSets, CountsAndPercentages) {
  const auto r = compare_sets({"a", "b", "c"}, {"b", "c", "d"});
  EXPECT_EQ(r.only_a, 1u);
  EXPECT_EQ(r.only_b, 1u);
  EXPECT_EQ(r.both, 2u);
  EXPECT_DOUBLE_EQ(r.overlap_pct, 50.0);
  EXPECT_NEAR(r.a_in_b_pct, 200.0 / 3, 1e-12);
  EXPECT_DOUBLE_EQ(r.relative_size_pct, 0.0);
  EXPECT_DOUBLE_EQ(compare_sets({}, {}).overlap_pct, 100.0);
  EXPECT_DOUBLE_EQ(compare_sets({"a"}, {}).overlap_pct, 0.0);
  EXPECT_DOUBLE_EQ(compare_sets({"a", "b"}, {"a", "b", "c", "d", "e"}).relative_size_pct, 150.0);
}

TEST(FeedDomains, EventAndRegistrationDateFilters) {
  std::stringstream feed;
  feed << rec("a.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-02T01:00:00Z"), 7200).to_json_line() << '\n'
       << rec("a.com", FeedEvent::Transient, parse_rfc3339("2023-11-08T00:00:00Z")).to_json_line() << '\n'
       << "\n"
       << rec("b.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-02T05:00:00Z"), 60).to_json_line() << '\n'
       << rec("c.com", FeedEvent::NrdDetected, parse_rfc3339("2023-11-02T05:00:00Z")).to_json_line() << '\n';
  const auto text = feed.str();
  auto run = [&](FeedFilter f) {
    std::stringstream in(text);
    return feed_domains(in, f);
  };
  EXPECT_EQ(run({}).size(), 3u);
  EXPECT_EQ(run({FeedEvent::Transient, std::nullopt}), std::set<std::string>{"a.com"});
  EXPECT_EQ(run({std::nullopt, parse_date("2023-11-01")}), std::set<std::string>{"a.com"});
  EXPECT_EQ(run({std::nullopt, parse_date("2023-11-02")}), std::set<std::string>{"b.com"});

  std::stringstream bad("{}\n");
  try {
    feed_domains(bad, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
  }
}

TEST(CompareFeeds, FilesAndDirectories) {
  testing_support::ScratchDir dir;
  {
    RotatingFileSink sink(dir.path() / "ours", false);
    FeedWriter w(sink);
    for (const auto* d : {"a.com", "b.com", "c.com"}) w.emit(rec(d, FeedEvent::NrdDetected, kT0, 0));
  }
  std::ofstream(dir.path() / "theirs.ndjson") << rec("c.com", FeedEvent::NrdDetected, kT0, 0).to_json_line() << '\n'
                                               << rec("d.com", FeedEvent::NrdDetected, kT0, 0).to_json_line() << '\n';
  const auto r = compare_feeds(dir.path() / "ours", dir.path() / "theirs.ndjson", {std::nullopt, date_of(kT0)});
  EXPECT_EQ(r.both, 1u);
  EXPECT_EQ(r.union_size(), 4u);
  EXPECT_EQ(r.to_json()["date"], "2023-11-02");
  EXPECT_DOUBLE_EQ(r.to_json()["overlap_pct"].get<double>(), 25.0);
  EXPECT_THROW(compare_feeds(dir.path() / "nope.ndjson", dir.path() / "theirs.ndjson"), Error);
}

}  // namespace
}  // namespace darkdns
