#pragma once

#include <atomic>
#include <chrono>

#include "darkdns/error.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

/// All scheduling reads time through this interface so the hermetic suite can
/// substitute a virtual clock.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual Timestamp now() const = 0;
};

class SystemClock final : public Clock {
 public:
  Timestamp now() const override {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  }
};

/// Discrete-event clock: only moves when the driver tells it to, and never backwards.
class VirtualClock final : public Clock {
 public:
  explicit VirtualClock(Timestamp start = Timestamp{}) : now_(to_epoch(start)) {}

  Timestamp now() const override { return from_epoch(now_.load(std::memory_order_acquire)); }

  void set(Timestamp t) {
    const auto target = to_epoch(t);
    if (target < now_.load(std::memory_order_acquire)) {
      throw Error(ErrorCode::InvalidParams, "virtual clock cannot move backwards");
    }
    now_.store(target, std::memory_order_release);
  }

  void advance(Duration d) { set(now() + d); }

 private:
  std::atomic<std::int64_t> now_;
};

}  // namespace darkdns
