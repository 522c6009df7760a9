#include <gtest/gtest.h>

#include <sstream>

#include "darkdns/darkdns.hpp"

namespace darkdns {
namespace {

SuffixRuleSet bundled_rules() { return SuffixRuleSet::load(std::string(DARKDNS_SOURCE_DIR) + "/data/public_suffix_list.dat"); }

TEST(NormalizeName, LowercasesAndStripsDotAndWildcard) {
  EXPECT_EQ(normalize_name("WWW.Example.COM."), "www.example.com");
  EXPECT_EQ(normalize_name("*.shop.example.org"), "shop.example.org");
  EXPECT_EQ(normalize_name("  xn--bcher-kva.de\r"), "xn--bcher-kva.de");
}

TEST(NormalizeName, RejectsMalformed) {
  for (const char* bad : {"", ".", "a..b", "bad name.com", "caf\xc3\xa9.fr", "*."}) {
    try {
      normalize_name(bad);
      ADD_FAILURE() << "accepted '" << bad << "'";
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MalformedName) << bad;
    }
  }
  EXPECT_THROW(normalize_name(std::string(64, 'a') + ".com"), Error);
  EXPECT_NO_THROW(normalize_name(std::string(63, 'a') + ".com"));
  std::string long_name;
  while (long_name.size() < 260) long_name += "abcdefghi.";
  EXPECT_THROW(normalize_name(long_name + "com"), Error);
}

struct SuffixCase {
  const char* name;
  const char* registrable;
};

class Registrable : public testing::TestWithParam<SuffixCase> {};

TEST_P(Registrable, MatchesListSemantics) {
  static const auto rules = bundled_rules();
  EXPECT_EQ(extract_registrable(normalize_name(GetParam().name), rules).full(), GetParam().registrable);
}

INSTANTIATE_TEST_SUITE_P(
    PublicSuffixList, Registrable,
    testing::Values(SuffixCase{"example.com", "example.com"}, SuffixCase{"a.b.c.example.com", "example.com"},
                    SuffixCase{"www.example.co.uk", "example.co.uk"}, SuffixCase{"foo.example.uk", "example.uk"},
                    SuffixCase{"shop.example.com.au", "example.com.au"},
                    // wildcard: every label under ck is a suffix
                    SuffixCase{"a.b.ck", "a.b.ck"}, SuffixCase{"x.a.b.ck", "a.b.ck"},
                    // exception rule wins
                    SuffixCase{"www.ck", "www.ck"}, SuffixCase{"a.www.ck", "www.ck"},
                    SuffixCase{"x.foo.kawasaki.jp", "x.foo.kawasaki.jp"},
                    SuffixCase{"a.city.kawasaki.jp", "city.kawasaki.jp"},
                    // private section is on by default
                    SuffixCase{"someone.blogspot.com", "someone.blogspot.com"},
                    SuffixCase{"deep.app.github.io", "app.github.io"}));

TEST(Registrable, PrivateSectionCanBeExcluded) {
  std::ifstream in(std::string(DARKDNS_SOURCE_DIR) + "/data/public_suffix_list.dat");
  const auto icann = SuffixRuleSet::parse(in, SuffixLoadOptions{false});
  EXPECT_EQ(extract_registrable("someone.blogspot.com", icann).full(), "blogspot.com");
}

TEST(Registrable, SuffixOrUnknownIsAnError) {
  const auto rules = bundled_rules();
  try {
    extract_registrable("co.uk", rules);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NameIsSuffix);
  }
  try {
    extract_registrable("example.invalidtld", rules);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NoMatchingSuffix);
  }
}

TEST(Registrable, RuleLinesUseFirstTokenOnly) {
  std::stringstream ss("// VERSION: 2024-01-01\ncom  trailing words\n\n// comment\n*.bd\n");
  const auto rules = SuffixRuleSet::parse(ss);
  EXPECT_EQ(rules.version(), "2024-01-01");
  EXPECT_EQ(rules.rules().size(), 2u);
  EXPECT_EQ(extract_registrable("x.y.bd", rules).full(), "x.y.bd");
}

TEST(Registrable, FullRoundTrip) {
  const auto d = RegistrableDomain::from_parts("example", "co.uk");
  EXPECT_EQ(d.full(), "example.co.uk");
  const auto back = registrable_from_full(d.full());
  EXPECT_EQ(back, d);
  EXPECT_EQ(back.tld(), "co.uk");
  EXPECT_THROW(registrable_from_full("nodot"), Error);
}

TEST(Time, Rfc3339RoundTrip) {
  const auto t = parse_rfc3339("2023-11-05T13:45:07Z");
  EXPECT_EQ(to_epoch(t), 1699191907);
  EXPECT_EQ(format_rfc3339(t), "2023-11-05T13:45:07Z");
  EXPECT_EQ(to_epoch(parse_rfc3339("2023-11-05T15:45:07+02:00")), 1699191907);
  EXPECT_EQ(to_epoch(parse_rfc3339("2023-11-05T13:45:07.999Z")), 1699191907);
  EXPECT_THROW(parse_rfc3339("2023-13-05T13:45:07Z"), Error);
  EXPECT_THROW(parse_rfc3339("yesterday"), Error);
}

TEST(Time, DatesAndDayBoundaries) {
  const auto d = parse_date("2024-02-29");
  EXPECT_EQ(format_date(d), "2024-02-29");
  EXPECT_EQ(format_date(date_of(parse_rfc3339("2024-02-29T23:59:59Z"))), "2024-02-29");
  EXPECT_EQ(format_date(date_of(parse_rfc3339("2024-03-01T00:00:00Z"))), "2024-03-01");
  EXPECT_EQ(format_rfc3339(start_of(d)), "2024-02-29T00:00:00Z");
  EXPECT_THROW(parse_date("2023-02-29"), Error);
}

TEST(LifecycleStates, NamesRoundTrip) {
  for (const auto s : kAllLifecycleStates) EXPECT_EQ(lifecycle_state_from_string(to_string(s)), s);
  EXPECT_THROW(lifecycle_state_from_string("DELETED"), Error);
}

TEST(LifecycleStates, TransitionTable) {
  using S = LifecycleState;
  int allowed = 0;
  for (const auto a : kAllLifecycleStates) {
    for (const auto b : kAllLifecycleStates) allowed += can_transition(a, b) ? 1 : 0;
  }
  EXPECT_EQ(allowed, 6);
  EXPECT_TRUE(can_transition(S::InZone, S::EarlyRemoved));
  EXPECT_FALSE(can_transition(S::Transient, S::InZone));
  EXPECT_FALSE(is_terminal(S::InZone));
  EXPECT_TRUE(is_terminal(S::EarlyRemoved));
}

TEST(Errors, MessageCarriesCode) {
  const Error e(ErrorCode::DuplicateSnapshot, "com 2023-11-01");
  EXPECT_EQ(std::string(e.what()), "DuplicateSnapshot: com 2023-11-01");
  EXPECT_EQ(e.code(), ErrorCode::DuplicateSnapshot);
}

TEST(Candidates, JsonLine) {
  const CandidateNRD c{registrable_from_full("example.com"), parse_rfc3339("2023-11-01T00:10:00Z"), "argon"};
  EXPECT_EQ(c.to_json_line(), R"({"domain":"example.com","first_seen_ct":"2023-11-01T00:10:00Z","source_log":"argon"})");
}

}  // namespace
}  // namespace darkdns
