#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "darkdns/clock.hpp"
#include "darkdns/dns/transport.hpp"
#include "darkdns/dns/wire.hpp"

namespace darkdns::dns {

/// DNS response code as recorded by probes; Timeout is a local sentinel.
enum class ProbeRcode : int { Timeout = -1, NoError = 0, FormErr = 1, ServFail = 2, NxDomain = 3, NotImp = 4, Refused = 5 };

inline std::string to_string(ProbeRcode r) {
  switch (r) {
    case ProbeRcode::Timeout: return "TIMEOUT";
    case ProbeRcode::NoError: return "NOERROR";
    case ProbeRcode::FormErr: return "FORMERR";
    case ProbeRcode::ServFail: return "SERVFAIL";
    case ProbeRcode::NxDomain: return "NXDOMAIN";
    case ProbeRcode::NotImp: return "NOTIMP";
    case ProbeRcode::Refused: return "REFUSED";
  }
  return "RCODE" + std::to_string(static_cast<int>(r));
}

inline ProbeRcode probe_rcode_from_string(const std::string& s) {
  for (int i = -1; i <= 15; ++i) {
    if (to_string(static_cast<ProbeRcode>(i)) == s) return static_cast<ProbeRcode>(i);
  }
  throw Error(ErrorCode::ParseError, "unknown rcode '" + s + "'");
}

inline ProbeRcode to_probe_rcode(Rcode r) { return static_cast<ProbeRcode>(static_cast<int>(r)); }

inline std::string qtype_name(std::uint16_t t) {
  switch (t) {
    case type::A: return "A";
    case type::AAAA: return "AAAA";
    case type::NS: return "NS";
    case type::CNAME: return "CNAME";
    case type::SOA: return "SOA";
    default: return "TYPE" + std::to_string(t);
  }
}

inline std::uint16_t qtype_from_name(const std::string& s) {
  for (std::uint16_t t : {type::A, type::AAAA, type::NS, type::CNAME, type::SOA}) {
    if (qtype_name(t) == s) return t;
  }
  throw Error(ErrorCode::ParseError, "unknown qtype '" + s + "'");
}

struct Resolution {
  ProbeRcode rcode = ProbeRcode::Timeout;
  std::vector<std::string> answers;
  std::uint32_t ttl = 0;
  std::string server;
  bool from_cache = false;
};

/// The recursive path used for A/AAAA probes.
class RecursiveResolver {
 public:
  virtual ~RecursiveResolver() = default;
  virtual Resolution resolve(const std::string& name, std::uint16_t qtype) = 0;
};

/// Forwards RD=1 queries to one upstream recursive server.
class StubResolver final : public RecursiveResolver {
 public:
  StubResolver(DnsTransport& transport, Endpoint upstream, std::chrono::milliseconds timeout, QueryIdSource& ids)
      : transport_(transport), upstream_(std::move(upstream)), timeout_(timeout), ids_(ids) {}

  Resolution resolve(const std::string& name, std::uint16_t qtype) override {
    Resolution out;
    out.server = upstream_.to_string();
    const auto reply = transport_.query(upstream_, make_query(ids_.next(), name, qtype, true), timeout_);
    if (!reply) return out;
    out.rcode = to_probe_rcode(reply->header.rcode);
    std::optional<std::uint32_t> min_ttl;
    for (const auto& rr : reply->answers) {
      if (rr.rtype != qtype) continue;
      out.answers.push_back(rr.text);
      min_ttl = std::min(min_ttl.value_or(rr.ttl), rr.ttl);
    }
    if (!min_ttl) {
      for (const auto& rr : reply->authority) {
        if (rr.rtype == type::SOA) min_ttl = rr.ttl;
      }
    }
    out.ttl = min_ttl.value_or(0);
    return out;
  }

 private:
  DnsTransport& transport_;
  Endpoint upstream_;
  std::chrono::milliseconds timeout_;
  QueryIdSource& ids_;
};

/// Positive and negative answers are cached for min(TTL, max_ttl); timeouts are
/// never cached. Entry age is measured on the injected clock.
class CachingResolver final : public RecursiveResolver {
 public:
  CachingResolver(RecursiveResolver& inner, const Clock& clock, Duration max_ttl = std::chrono::seconds(60))
      : inner_(inner), clock_(clock), max_ttl_(max_ttl) {}

  Resolution resolve(const std::string& name, std::uint16_t qtype) override {
    const auto key = std::make_pair(name, qtype);
    const Timestamp now = clock_.now();
    {
      std::lock_guard lock(mu_);
      if (const auto it = cache_.find(key); it != cache_.end()) {
        if (now < it->second.expires) {
          ++hits_;
          max_served_age_ = std::max(max_served_age_, now - it->second.stored);
          Resolution r = it->second.value;
          r.from_cache = true;
          return r;
        }
        cache_.erase(it);
      }
      ++misses_;
    }
    Resolution r = inner_.resolve(name, qtype);
    if (r.rcode == ProbeRcode::Timeout) return r;
    const Duration ttl = std::min<Duration>(Duration{r.ttl}, max_ttl_);
    if (ttl > Duration{0}) {
      std::lock_guard lock(mu_);
      if (cache_.size() >= kSweepThreshold) sweep(now);
      cache_[key] = Entry{r, now, now + ttl};
    }
    return r;
  }

  std::uint64_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::uint64_t misses() const {
    std::lock_guard lock(mu_);
    return misses_;
  }
  /// Oldest entry age ever served from cache.
  Duration max_served_age() const {
    std::lock_guard lock(mu_);
    return max_served_age_;
  }
  Duration max_ttl() const { return max_ttl_; }

 private:
  static constexpr std::size_t kSweepThreshold = 4096;

  struct Entry {
    Resolution value;
    Timestamp stored;
    Timestamp expires;
  };

  void sweep(Timestamp now) {
    for (auto it = cache_.begin(); it != cache_.end();) {
      it = now >= it->second.expires ? cache_.erase(it) : std::next(it);
    }
  }

  RecursiveResolver& inner_;
  const Clock& clock_;
  Duration max_ttl_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::uint16_t>, Entry> cache_;
  std::uint64_t hits_ = 0;
  std::uint64_t misses_ = 0;
  Duration max_served_age_{0};
};

}  // namespace darkdns::dns
