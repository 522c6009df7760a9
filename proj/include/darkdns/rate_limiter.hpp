#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include "json.hpp"

#include "darkdns/error.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

/// Continuous-refill token bucket. With burst 1 the number of grants inside any
/// half-open window of 60 s never exceeds the per-minute rate.
class TokenBucket {
 public:
  explicit TokenBucket(double rate_per_min = 10.0, double burst = 1.0)
      : rate_per_sec_(rate_per_min / 60.0), burst_(burst), tokens_(burst) {
    if (rate_per_min <= 0 || burst < 1.0) throw Error(ErrorCode::InvalidParams, "token bucket needs rate > 0 and burst >= 1");
  }

  bool try_acquire(Timestamp now) {
    refill(now);
    if (tokens_ + kEpsilon < 1.0) return false;
    tokens_ = std::max(0.0, tokens_ - 1.0);
    return true;
  }

  Timestamp next_available(Timestamp now) const {
    TokenBucket probe = *this;
    probe.refill(now);
    if (probe.tokens_ + kEpsilon >= 1.0) return now;
    const double wait = (1.0 - probe.tokens_) / rate_per_sec_;
    return now + Duration{static_cast<std::int64_t>(std::ceil(wait - kEpsilon))};
  }

  double rate_per_min() const { return rate_per_sec_ * 60.0; }

  nlohmann::json to_json() const {
    return {{"tokens", tokens_}, {"last", last_ ? to_epoch(*last_) : -1}};
  }

  void restore(const nlohmann::json& j) {
    tokens_ = j.at("tokens").get<double>();
    const auto last = j.at("last").get<std::int64_t>();
    if (last >= 0) {
      last_ = from_epoch(last);
    } else {
      last_.reset();
    }
  }

 private:
  static constexpr double kEpsilon = 1e-9;

  void refill(Timestamp now) {
    if (last_ && now > *last_) {
      tokens_ = std::min(burst_, tokens_ + static_cast<double>((now - *last_).count()) * rate_per_sec_);
    }
    if (!last_ || now > *last_) last_ = now;
  }

  double rate_per_sec_;
  double burst_;
  double tokens_;
  std::optional<Timestamp> last_;
};

/// One bucket per endpoint, created lazily. Acquire is atomic across threads.
class EndpointRateLimiter {
 public:
  explicit EndpointRateLimiter(double rate_per_min = 10.0, double burst = 1.0)
      : rate_per_min_(rate_per_min), burst_(burst) {}

  bool try_acquire(const std::string& endpoint, Timestamp now) {
    std::lock_guard lock(mutex_);
    return bucket(endpoint).try_acquire(now);
  }

  Timestamp next_available(const std::string& endpoint, Timestamp now) {
    std::lock_guard lock(mutex_);
    return bucket(endpoint).next_available(now);
  }

  double rate_per_min() const { return rate_per_min_; }

  nlohmann::json to_json() const {
    std::lock_guard lock(mutex_);
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [ep, b] : buckets_) j[ep] = b.to_json();
    return j;
  }

  void restore(const nlohmann::json& j) {
    std::lock_guard lock(mutex_);
    buckets_.clear();
    for (const auto& [ep, state] : j.items()) {
      TokenBucket b(rate_per_min_, burst_);
      b.restore(state);
      buckets_.emplace(ep, b);
    }
  }

 private:
  TokenBucket& bucket(const std::string& endpoint) {
    auto it = buckets_.find(endpoint);
    if (it == buckets_.end()) it = buckets_.emplace(endpoint, TokenBucket(rate_per_min_, burst_)).first;
    return it->second;
  }

  double rate_per_min_;
  double burst_;
  mutable std::mutex mutex_;
  std::map<std::string, TokenBucket> buckets_;
};

}  // namespace darkdns
