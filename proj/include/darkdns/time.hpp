#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

#include "darkdns/error.hpp"

namespace darkdns {

/// UTC instant at one-second resolution.
using Timestamp = std::chrono::sys_seconds;
using Duration = std::chrono::seconds;
/// UTC calendar day.
using Date = std::chrono::sys_days;

inline Date date_of(Timestamp ts) { return std::chrono::floor<std::chrono::days>(ts); }

inline Timestamp start_of(Date d) { return Timestamp{d}; }

inline std::int64_t to_epoch(Timestamp ts) { return ts.time_since_epoch().count(); }

inline Timestamp from_epoch(std::int64_t secs) { return Timestamp{Duration{secs}}; }

/// Fractional epoch seconds (as reported by CT stream aggregators) floored to the second.
inline Timestamp from_epoch_fractional(double secs) {
  return from_epoch(static_cast<std::int64_t>(std::floor(secs)));
}

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
    v = v * 10 + (s[i] - '0');
  }
  out = v;
  return true;
}

inline bool make_date(int y, int m, int d, Date& out) {
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                  std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) return false;
  out = Date{ymd};
  return true;
}

}  // namespace detail

inline std::string format_date(Date d) {
  std::chrono::year_month_day ymd{d};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

/// Parses "YYYY-MM-DD".
inline Date parse_date(std::string_view s) {
  int y = 0, m = 0, d = 0;
  Date out;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-' || !detail::parse_digits(s, 0, 4, y) ||
      !detail::parse_digits(s, 5, 2, m) || !detail::parse_digits(s, 8, 2, d) ||
      !detail::make_date(y, m, d, out)) {
    throw Error(ErrorCode::ParseError, "invalid date '" + std::string(s) + "'");
  }
  return out;
}

/// Always renders UTC with a trailing 'Z'.
inline std::string format_rfc3339(Timestamp ts) {
  const Date d = date_of(ts);
  const auto secs = (ts - start_of(d)).count();
  char buf[32];
  std::snprintf(buf, sizeof buf, "%sT%02lld:%02lld:%02lldZ", format_date(d).c_str(),
                static_cast<long long>(secs / 3600), static_cast<long long>(secs / 60 % 60),
                static_cast<long long>(secs % 60));
  return buf;
}

/// Parses RFC 3339 date-times. Fractional seconds are truncated, numeric offsets are
/// folded into the result so the returned instant is UTC.
inline Timestamp parse_rfc3339(std::string_view s) {
  auto fail = [&]() -> Error {
    return Error(ErrorCode::ParseError, "invalid RFC3339 timestamp '" + std::string(s) + "'");
  };
  if (s.size() < 20) throw fail();
  Date day;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || s[13] != ':' ||
      s[16] != ':' || !detail::parse_digits(s, 0, 4, y) || !detail::parse_digits(s, 5, 2, mo) ||
      !detail::parse_digits(s, 8, 2, d) || !detail::parse_digits(s, 11, 2, h) ||
      !detail::parse_digits(s, 14, 2, mi) || !detail::parse_digits(s, 17, 2, se) ||
      !detail::make_date(y, mo, d, day) || h > 23 || mi > 59 || se > 60) {
    throw fail();
  }
  std::size_t pos = 19;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    const std::size_t digits_start = pos;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
    if (pos == digits_start) throw fail();
  }
  if (pos >= s.size()) throw fail();
  std::int64_t offset = 0;
  if (s[pos] == 'Z' || s[pos] == 'z') {
    ++pos;
  } else if (s[pos] == '+' || s[pos] == '-') {
    int oh = 0, om = 0;
    if (pos + 6 > s.size() || s[pos + 3] != ':' || !detail::parse_digits(s, pos + 1, 2, oh) ||
        !detail::parse_digits(s, pos + 4, 2, om) || oh > 23 || om > 59) {
      throw fail();
    }
    offset = (oh * 3600 + om * 60) * (s[pos] == '+' ? 1 : -1);
    pos += 6;
  } else {
    throw fail();
  }
  if (pos != s.size()) throw fail();
  const Timestamp local = start_of(day) + Duration{h * 3600 + mi * 60 + std::min(se, 59)};
  return local - Duration{offset};
}

}  // namespace darkdns
