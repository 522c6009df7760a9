#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "darkdns/error.hpp"
#include "darkdns/name.hpp"

namespace darkdns {

/// The registration unit: one label directly below a public suffix.
class RegistrableDomain {
 public:
  RegistrableDomain() = default;

  /// Trusted constructor; callers outside this header go through extract_registrable.
  static RegistrableDomain from_parts(std::string label, std::string tld) {
    RegistrableDomain d;
    d.full_ = label + "." + tld;
    d.label_ = std::move(label);
    d.tld_ = std::move(tld);
    return d;
  }

  const std::string& label() const { return label_; }
  /// The public suffix (which may span several labels, e.g. "co.uk").
  const std::string& tld() const { return tld_; }
  const std::string& full() const { return full_; }

  friend bool operator==(const RegistrableDomain& a, const RegistrableDomain& b) { return a.full_ == b.full_; }
  friend auto operator<=>(const RegistrableDomain& a, const RegistrableDomain& b) { return a.full_ <=> b.full_; }

 private:
  std::string label_;
  std::string tld_;
  std::string full_;
};

struct SuffixRule {
  enum class Kind { Plain, Wildcard, Exception };
  Kind kind = Kind::Plain;
  /// Rule text without the "*." or "!" marker.
  std::string base;
  bool private_section = false;
};

struct SuffixLoadOptions {
  bool include_private = true;
};

/// Public-suffix rules in the standard list format, matched with the published
/// algorithm: exception rules win, otherwise the rule with the most labels.
class SuffixRuleSet {
 public:
  SuffixRuleSet() = default;

  static SuffixRuleSet parse(std::istream& in, SuffixLoadOptions opts = {}) {
    SuffixRuleSet set;
    std::string line;
    bool in_private = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find("===BEGIN PRIVATE DOMAINS===") != std::string::npos) in_private = true;
      if (line.find("===END PRIVATE DOMAINS===") != std::string::npos) in_private = false;
      if (const auto v = line.find("// VERSION:"); v != std::string::npos) {
        set.version_ = trim(line.substr(v + 11));
      }
      // Only the first whitespace-delimited token of a line is the rule.
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto end = line.find_first_of(" \t\r", first);
      std::string token = line.substr(first, end == std::string::npos ? std::string::npos : end - first);
      if (token.rfind("//", 0) == 0) continue;
      if (in_private && !opts.include_private) continue;
      SuffixRule rule;
      rule.private_section = in_private;
      if (token[0] == '!') {
        rule.kind = SuffixRule::Kind::Exception;
        token.erase(0, 1);
      } else if (token.rfind("*.", 0) == 0) {
        rule.kind = SuffixRule::Kind::Wildcard;
        token.erase(0, 2);
      }
      try {
        rule.base = normalize_name(token);
      } catch (const Error&) {
        throw Error(ErrorCode::ParseError, "suffix rule line " + std::to_string(line_no) + ": '" + line + "'");
      }
      set.add(std::move(rule));
    }
    if (set.version_.empty()) set.version_ = "rules:" + std::to_string(set.rules_.size());
    return set;
  }

  static SuffixRuleSet load(const std::filesystem::path& path, SuffixLoadOptions opts = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open suffix rule file " + path.string());
    return parse(in, opts);
  }

  /// Convenience for tests and simulations: a rule set with plain rules only.
  static SuffixRuleSet from_rules(const std::vector<std::string>& lines) {
    std::stringstream ss;
    for (const auto& l : lines) ss << l << '\n';
    return parse(ss);
  }

  const std::vector<SuffixRule>& rules() const { return rules_; }
  const std::string& version() const { return version_; }
  bool empty() const { return rules_.empty(); }

  /// Returns the label index where the public suffix starts, or npos when no
  /// rule matches.
  std::size_t public_suffix_start(const std::vector<std::string_view>& labels) const {
    const std::size_t n = labels.size();
    std::size_t best = std::string::npos;
    // Walk from the shortest suffix to the longest so later matches have more labels.
    std::string suffix;
    for (std::size_t k = n; k-- > 0;) {
      const std::string parent = suffix;
      suffix = suffix.empty() ? std::string(labels[k]) : std::string(labels[k]) + "." + suffix;
      if (exceptions_.count(suffix)) return k + 1;
      if (plain_.count(suffix)) best = k;
      if (!parent.empty() && wildcards_.count(parent)) best = k;
    }
    return best;
  }

 private:
  static std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  }

  void add(SuffixRule rule) {
    switch (rule.kind) {
      case SuffixRule::Kind::Plain: plain_.insert(rule.base); break;
      case SuffixRule::Kind::Wildcard: wildcards_.insert(rule.base); break;
      case SuffixRule::Kind::Exception: exceptions_.insert(rule.base); break;
    }
    rules_.push_back(std::move(rule));
  }

  std::vector<SuffixRule> rules_;
  std::unordered_set<std::string> plain_;
  std::unordered_set<std::string> wildcards_;
  std::unordered_set<std::string> exceptions_;
  std::string version_;
};

/// Reduces a normalized name to its registration unit.
inline RegistrableDomain extract_registrable(std::string_view name, const SuffixRuleSet& rules) {
  const auto labels = split_labels(name);
  const std::size_t start = rules.public_suffix_start(labels);
  if (start == std::string::npos) {
    throw Error(ErrorCode::NoMatchingSuffix, "no suffix rule matches '" + std::string(name) + "'");
  }
  if (start == 0) throw Error(ErrorCode::NameIsSuffix, "'" + std::string(name) + "' is a public suffix");
  std::string tld;
  for (std::size_t i = start; i < labels.size(); ++i) {
    if (!tld.empty()) tld += '.';
    tld += labels[i];
  }
  return RegistrableDomain::from_parts(std::string(labels[start - 1]), std::move(tld));
}

}  // namespace darkdns

template <>
struct std::hash<darkdns::RegistrableDomain> {
  std::size_t operator()(const darkdns::RegistrableDomain& d) const noexcept {
    return std::hash<std::string>{}(d.full());
  }
};

namespace darkdns {

/// Rebuilds a domain from its "label.tld" form (the label never contains a dot).
inline RegistrableDomain registrable_from_full(std::string_view full) {
  const auto dot = full.find('.');
  if (dot == std::string_view::npos || dot == 0 || dot + 1 >= full.size()) {
    throw Error(ErrorCode::MalformedName, "'" + std::string(full) + "' is not label.tld");
  }
  return RegistrableDomain::from_parts(std::string(full.substr(0, dot)), std::string(full.substr(dot + 1)));
}

}  // namespace darkdns
