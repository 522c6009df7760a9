#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "darkdns/clock.hpp"
#include "darkdns/dns/transport.hpp"
#include "darkdns/dns/wire.hpp"
#include "darkdns/sim/scenario.hpp"

namespace darkdns::sim {

/// Per-name query counters shared by the mock servers.
class HitCounter {
 public:
  void hit(const std::string& name, std::uint16_t qtype) {
    std::lock_guard lock(mu_);
    ++by_name_[{name, qtype}];
    ++total_;
  }
  std::uint64_t count(const std::string& name, std::uint16_t qtype) const {
    std::lock_guard lock(mu_);
    const auto it = by_name_.find({name, qtype});
    return it == by_name_.end() ? 0 : it->second;
  }
  std::uint64_t total() const {
    std::lock_guard lock(mu_);
    return total_;
  }
  std::map<std::string, std::uint64_t> per_name(std::uint16_t qtype) const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::uint64_t> out;
    for (const auto& [k, v] : by_name_) {
      if (k.second == qtype) out[k.first] += v;
    }
    return out;
  }

 private:
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::uint16_t>, std::uint64_t> by_name_;
  std::uint64_t total_ = 0;
};

namespace detail {

inline std::optional<dns::Message> decode_query(std::span<const std::uint8_t> wire) {
  try {
    auto q = dns::decode(wire);
    if (q.header.qr || q.questions.size() != 1) return std::nullopt;
    return q;
  } catch (const Error&) {
    return std::nullopt;
  }
}

inline std::string strip_dot(std::string s) {
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace detail

/// Authoritative server for one TLD: referrals for live delegations, NXDOMAIN
/// otherwise, REFUSED for names outside the zone.
class MockAuthoritative final : public dns::WireHandler {
 public:
  MockAuthoritative(const World& world, const Clock& clock, std::string tld)
      : world_(world), clock_(clock), tld_(std::move(tld)) {}

  std::optional<std::vector<std::uint8_t>> handle_wire(std::span<const std::uint8_t> wire, bool over_tcp) override {
    const auto q = detail::decode_query(wire);
    if (!q) return std::nullopt;
    const auto& question = q->questions.front();
    const std::string name = detail::strip_dot(question.name);
    hits_.hit(name, question.qtype);
    if (q->header.rd) rd_set_.fetch_add(1, std::memory_order_relaxed);
    const std::string suffix = "." + tld_;
    if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
      refused_.fetch_add(1, std::memory_order_relaxed);
      return dns::detail::fit_udp(*q, dns::make_response(*q, dns::Rcode::Refused));
    }
    const std::string registrable = name.substr(name.rfind('.', name.size() - suffix.size() - 1) + 1);
    const auto* t = world_.find(registrable);
    const Timestamp now = clock_.now();
    if (t && t->delegated_at(now)) {
      auto r = dns::make_response(*q, dns::Rcode::NoError);
      if (const auto* ns = t->ns_at(now)) {
        for (const auto& host : *ns) r.authority.push_back(dns::make_ns(registrable, host, 172800));
      }
      return over_tcp ? dns::encode(r) : dns::detail::fit_udp(*q, std::move(r));
    }
    auto r = dns::make_response(*q, dns::Rcode::NxDomain);
    r.header.aa = true;
    r.authority.push_back(dns::make_soa(tld_, 900, 2023110100, 900));
    return over_tcp ? dns::encode(r) : dns::detail::fit_udp(*q, std::move(r));
  }

  const std::string& tld() const { return tld_; }
  const HitCounter& hits() const { return hits_; }
  std::uint64_t refused() const { return refused_.load(); }
  std::uint64_t recursion_desired() const { return rd_set_.load(); }

 private:
  const World& world_;
  const Clock& clock_;
  std::string tld_;
  HitCounter hits_;
  std::atomic<std::uint64_t> refused_{0};
  std::atomic<std::uint64_t> rd_set_{0};
};

/// Recursive resolver stand-in: A/AAAA answers for live domains with a long
/// TTL so the probe-side cache cap is what bounds answer age.
class MockRecursive final : public dns::WireHandler {
 public:
  MockRecursive(const World& world, const Clock& clock, std::uint32_t answer_ttl = 3600)
      : world_(world), clock_(clock), answer_ttl_(answer_ttl) {}

  std::optional<std::vector<std::uint8_t>> handle_wire(std::span<const std::uint8_t> wire, bool over_tcp) override {
    const auto q = detail::decode_query(wire);
    if (!q) return std::nullopt;
    const auto& question = q->questions.front();
    const std::string name = detail::strip_dot(question.name);
    hits_.hit(name, question.qtype);
    if (question.qtype == dns::type::NS) ns_queries_.fetch_add(1, std::memory_order_relaxed);
    const auto* t = world_.find(name);
    const Timestamp now = clock_.now();
    dns::Message r;
    if (t && t->delegated_at(now)) {
      r = dns::make_response(*q, dns::Rcode::NoError);
      const auto h = std::hash<std::string>{}(name);
      if (question.qtype == dns::type::A) {
        r.answers.push_back(dns::make_a(name, "192.0.2." + std::to_string(1 + h % 250), answer_ttl_));
      } else if (question.qtype == dns::type::AAAA) {
        r.answers.push_back(dns::make_aaaa(name, "2001:db8::" + std::to_string(1 + h % 9000), answer_ttl_));
      } else if (question.qtype == dns::type::NS) {
        if (const auto* ns = t->ns_at(now)) {
          for (const auto& host : *ns) r.answers.push_back(dns::make_ns(name, host, answer_ttl_));
        }
      }
    } else {
      r = dns::make_response(*q, dns::Rcode::NxDomain);
      const auto dot = name.rfind('.');
      r.authority.push_back(dns::make_soa(dot == std::string::npos ? name : name.substr(dot + 1), 900, 1, 900));
    }
    r.header.ra = true;
    return over_tcp ? dns::encode(r) : dns::detail::fit_udp(*q, std::move(r));
  }

  const HitCounter& hits() const { return hits_; }
  std::uint64_t ns_queries() const { return ns_queries_.load(); }

 private:
  const World& world_;
  const Clock& clock_;
  std::uint32_t answer_ttl_;
  HitCounter hits_;
  std::atomic<std::uint64_t> ns_queries_{0};
};

}  // namespace darkdns::sim
