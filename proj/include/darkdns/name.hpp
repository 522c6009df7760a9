#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "darkdns/error.hpp"

namespace darkdns {

inline constexpr std::size_t kMaxLabelLength = 63;
inline constexpr std::size_t kMaxNameLength = 253;

inline std::vector<std::string_view> split_labels(std::string_view name) {
  std::vector<std::string_view> labels;
  std::size_t start = 0;
  while (true) {
    const auto dot = name.find('.', start);
    if (dot == std::string_view::npos) {
      labels.push_back(name.substr(start));
      break;
    }
    labels.push_back(name.substr(start, dot - start));
    start = dot + 1;
  }
  return labels;
}

/// Lower-cases, strips one trailing dot and a leading "*." wildcard label.
/// IDN labels are expected in punycode ("xn--") form; raw non-ASCII bytes are
/// rejected rather than converted.
inline std::string normalize_name(std::string_view raw) {
  auto malformed = [&](const char* why) {
    return Error(ErrorCode::MalformedName, std::string(why) + " in '" + std::string(raw) + "'");
  };
  std::string_view s = raw;
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) throw malformed("empty name");
  if (s.back() == '.') s.remove_suffix(1);
  if (s.size() >= 2 && s[0] == '*' && s[1] == '.') s.remove_prefix(2);
  if (s.empty()) throw malformed("empty name");
  if (s.size() > kMaxNameLength) throw malformed("name longer than 253 octets");

  std::string out;
  out.reserve(s.size());
  std::size_t label_len = 0;
  for (const char c : s) {
    if (c == '.') {
      if (label_len == 0) throw malformed("empty label");
      label_len = 0;
      out.push_back('.');
      continue;
    }
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_';
    if (!ok) throw malformed("invalid character");
    if (++label_len > kMaxLabelLength) throw malformed("label longer than 63 octets");
    out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
  }
  if (label_len == 0) throw malformed("empty label");
  return out;
}

}  // namespace darkdns
