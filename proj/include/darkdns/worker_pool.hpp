#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace darkdns {

/// Fixed pool that runs index-parallel batches. Small batches and single-worker
/// pools run inline on the calling thread.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) : size_(workers == 0 ? 1 : workers) {
    if (size_ == 1) return;
    threads_.reserve(size_);
    for (std::size_t i = 0; i < size_; ++i) threads_.emplace_back([this] { worker(); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const { return size_; }

  /// Runs fn(0..n-1) and returns when all calls finished. The first exception
  /// thrown by any call is rethrown here.
  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    if (threads_.empty() || n < kInlineThreshold) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    std::unique_lock lock(mu_);
    job_ = &fn;
    job_size_ = n;
    next_ = 0;
    pending_ = n;
    error_ = nullptr;
    cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  static constexpr std::size_t kInlineThreshold = 2;

  void worker() {
    std::unique_lock lock(mu_);
    while (true) {
      cv_.wait(lock, [&] { return stopping_ || (job_ && next_ < job_size_); });
      if (stopping_) return;
      while (job_ && next_ < job_size_) {
        const std::size_t i = next_++;
        const auto* fn = job_;
        lock.unlock();
        std::exception_ptr err;
        try {
          (*fn)(i);
        } catch (...) {
          err = std::current_exception();
        }
        lock.lock();
        if (err && !error_) error_ = err;
        if (--pending_ == 0) done_cv_.notify_one();
      }
    }
  }

  std::size_t size_;
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t job_size_ = 0;
  std::size_t next_ = 0;
  std::size_t pending_ = 0;
  std::exception_ptr error_;
  bool stopping_ = false;
};

}  // namespace darkdns
