#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>

#include "httplib.h"

#include "darkdns/error.hpp"

namespace darkdns {

/// Named monotone counters rendered as "key value" lines.
class Metrics {
 public:
  void add(const std::string& name, std::uint64_t n = 1) { counter(name).fetch_add(n, std::memory_order_relaxed); }

  std::uint64_t get(const std::string& name) const {
    std::lock_guard lock(mu_);
    const auto it = counters_.find(name);
    return it == counters_.end() ? 0 : it->second->load();
  }

  std::map<std::string, std::uint64_t> snapshot() const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::uint64_t> out;
    for (const auto& [k, v] : counters_) out[k] = v->load();
    return out;
  }

  std::string render() const {
    std::ostringstream os;
    for (const auto& [k, v] : snapshot()) os << k << ' ' << v << '\n';
    return os.str();
  }

  /// Restores persisted values; counters never go below what they were.
  void restore(const std::map<std::string, std::uint64_t>& values) {
    for (const auto& [k, v] : values) {
      auto& c = counter(k);
      std::uint64_t cur = c.load();
      while (cur < v && !c.compare_exchange_weak(cur, v)) {
      }
    }
  }

 private:
  std::atomic<std::uint64_t>& counter(const std::string& name) {
    std::lock_guard lock(mu_);
    auto& slot = counters_[name];
    if (!slot) slot = std::make_unique<std::atomic<std::uint64_t>>(0);
    return *slot;
  }

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<std::atomic<std::uint64_t>>> counters_;
};

/// Serves GET /metrics on a local port.
class MetricsServer {
 public:
  MetricsServer(const Metrics& metrics, const std::string& host, int port) : metrics_(metrics) {
    server_.Get("/metrics", [this](const httplib::Request&, httplib::Response& res) {
      res.set_content(metrics_.render(), "text/plain");
    });
    port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (port_ < 0) throw Error(ErrorCode::StartupError, "cannot bind metrics endpoint on " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  MetricsServer(const MetricsServer&) = delete;
  MetricsServer& operator=(const MetricsServer&) = delete;
  ~MetricsServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const { return port_; }

 private:
  const Metrics& metrics_;
  httplib::Server server_;
  int port_ = -1;
  std::thread thread_;
};

}  // namespace darkdns
