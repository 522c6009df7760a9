#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <utility>
#include <fcntl.h>
#include <span>
#include <string>
#include <vector>

#include "darkdns/dns/wire.hpp"
#include "darkdns/error.hpp"

namespace darkdns::dns {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 53;

  std::string to_string() const { return host + ":" + std::to_string(port); }
  auto operator<=>(const Endpoint&) const = default;

  /// Parses "host:port" (IPv4) or "host" with the default port 53.
  static Endpoint parse(const std::string& s) {
    Endpoint e;
    const auto colon = s.rfind(':');
    if (colon == std::string::npos) {
      e.host = s;
      return e;
    }
    e.host = s.substr(0, colon);
    const auto port = std::stoul(s.substr(colon + 1));
    if (port == 0 || port > 65535) throw Error(ErrorCode::ConfigError, "bad port in '" + s + "'");
    e.port = static_cast<std::uint16_t>(port);
    return e;
  }
};

/// Sends one query and waits for one matching response. nullopt means timeout
/// or an unusable reply; there are no retries at this layer.
class DnsTransport {
 public:
  virtual ~DnsTransport() = default;
  virtual std::optional<Message> query(const Endpoint& server, const Message& q, std::chrono::milliseconds timeout) = 0;
};

/// Anything that answers wire-format queries. Mock servers implement this so
/// the same handler can sit behind real sockets or be called in-process.
class WireHandler {
 public:
  virtual ~WireHandler() = default;
  /// Returns the encoded reply, or nullopt to drop the query (simulated timeout).
  virtual std::optional<std::vector<std::uint8_t>> handle_wire(std::span<const std::uint8_t> query, bool over_tcp) = 0;
};

namespace detail {

/// UDP replies larger than the requester's advertised size are truncated to
/// the header and question with TC set.
inline std::vector<std::uint8_t> fit_udp(const Message& query, Message reply) {
  const std::size_t limit = query.edns_payload ? std::max<std::size_t>(*query.edns_payload, kClassicUdpLimit)
                                               : kClassicUdpLimit;
  auto wire = encode(reply);
  if (wire.size() <= limit) return wire;
  reply.answers.clear();
  reply.authority.clear();
  reply.additional.clear();
  reply.header.tc = true;
  return encode(reply);
}

inline bool matches(const Message& q, const Message& r) {
  return r.header.qr && r.header.id == q.header.id && r.questions.size() == q.questions.size() &&
         (q.questions.empty() || (r.questions[0].name == q.questions[0].name &&
                                  r.questions[0].qtype == q.questions[0].qtype));
}

}  // namespace detail

/// Calls registered handlers directly with encoded bytes. Used by the bulk
/// simulation where socket round-trips dominate runtime; the codec, truncation
/// and TCP fallback logic are still exercised.
class InProcessDnsTransport final : public DnsTransport {
 public:
  void attach(const Endpoint& ep, WireHandler& handler) {
    std::lock_guard lock(mu_);
    handlers_[ep] = &handler;
  }

  std::optional<Message> query(const Endpoint& server, const Message& q, std::chrono::milliseconds) override {
    WireHandler* h = nullptr;
    {
      std::lock_guard lock(mu_);
      const auto it = handlers_.find(server);
      if (it == handlers_.end()) return std::nullopt;
      h = it->second;
    }
    const auto wire = encode(q);
    auto reply = exchange(*h, q, wire, false);
    if (reply && reply->header.tc) reply = exchange(*h, q, wire, true);
    return reply;
  }

 private:
  static std::optional<Message> exchange(WireHandler& h, const Message& q, const std::vector<std::uint8_t>& wire,
                                         bool tcp) {
    const auto bytes = h.handle_wire(wire, tcp);
    if (!bytes) return std::nullopt;
    try {
      auto m = decode(*bytes);
      if (!detail::matches(q, m)) return std::nullopt;
      return m;
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::mutex mu_;
  std::map<Endpoint, WireHandler*> handlers_;
};

namespace detail {

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

inline sockaddr_in to_sockaddr(const Endpoint& ep) {
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(ep.port);
  if (inet_pton(AF_INET, ep.host.c_str(), &sa.sin_addr) != 1) {
    throw Error(ErrorCode::ConfigError, "not an IPv4 address: " + ep.host);
  }
  return sa;
}

inline int remaining_ms(std::chrono::steady_clock::time_point deadline) {
  const auto left =
      std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
  return left > 0 ? static_cast<int>(left) : 0;
}

inline bool wait_readable(int fd, std::chrono::steady_clock::time_point deadline) {
  pollfd p{fd, POLLIN, 0};
  while (true) {
    const int rc = ::poll(&p, 1, remaining_ms(deadline));
    if (rc > 0) return true;
    if (rc == 0) return false;
    if (errno != EINTR) return false;
  }
}

inline bool read_exact(int fd, std::uint8_t* buf, std::size_t n, std::chrono::steady_clock::time_point deadline) {
  std::size_t got = 0;
  while (got < n) {
    if (!wait_readable(fd, deadline)) return false;
    const auto r = ::recv(fd, buf + got, n - got, 0);
    if (r <= 0) return false;
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline bool write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const auto w = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (w <= 0) return false;
    sent += static_cast<std::size_t>(w);
  }
  return true;
}

}  // namespace detail

/// Real DNS over UDP with a TCP retry when the reply is truncated.
class UdpDnsTransport final : public DnsTransport {
 public:
  std::optional<Message> query(const Endpoint& server, const Message& q, std::chrono::milliseconds timeout) override {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    const auto wire = encode(q);
    auto reply = udp_exchange(server, q, wire, deadline);
    if (reply && reply->header.tc) reply = tcp_exchange(server, q, wire, deadline);
    return reply;
  }

 private:
  static std::optional<Message> udp_exchange(const Endpoint& server, const Message& q,
                                             const std::vector<std::uint8_t>& wire,
                                             std::chrono::steady_clock::time_point deadline) {
    detail::Fd fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    if (fd.get() < 0) return std::nullopt;
    const auto sa = detail::to_sockaddr(server);
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) return std::nullopt;
    if (::send(fd.get(), wire.data(), wire.size(), 0) != static_cast<ssize_t>(wire.size())) return std::nullopt;
    std::vector<std::uint8_t> buf(65535);
    while (detail::wait_readable(fd.get(), deadline)) {
      const auto n = ::recv(fd.get(), buf.data(), buf.size(), 0);
      if (n <= 0) return std::nullopt;
      try {
        auto m = decode(std::span<const std::uint8_t>(buf.data(), static_cast<std::size_t>(n)));
        if (detail::matches(q, m)) return m;
      } catch (const Error&) {
        // Ignore garbage and keep waiting for the real answer.
      }
    }
    return std::nullopt;
  }

  static std::optional<Message> tcp_exchange(const Endpoint& server, const Message& q,
                                             const std::vector<std::uint8_t>& wire,
                                             std::chrono::steady_clock::time_point deadline) {
    detail::Fd fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (fd.get() < 0) return std::nullopt;
    const auto sa = detail::to_sockaddr(server);
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&sa), sizeof sa) != 0) return std::nullopt;
    std::vector<std::uint8_t> framed;
    framed.reserve(wire.size() + 2);
    detail::put16(framed, static_cast<std::uint16_t>(wire.size()));
    framed.insert(framed.end(), wire.begin(), wire.end());
    if (!detail::write_all(fd.get(), framed.data(), framed.size())) return std::nullopt;
    std::uint8_t len_buf[2];
    if (!detail::read_exact(fd.get(), len_buf, 2, deadline)) return std::nullopt;
    std::vector<std::uint8_t> body(static_cast<std::size_t>((len_buf[0] << 8) | len_buf[1]));
    if (!detail::read_exact(fd.get(), body.data(), body.size(), deadline)) return std::nullopt;
    try {
      auto m = decode(body);
      if (detail::matches(q, m)) return m;
    } catch (const Error&) {
    }
    return std::nullopt;
  }
};

/// Serves a WireHandler on loopback UDP and TCP (same port) from one thread.
class DnsSocketServer {
 public:
  explicit DnsSocketServer(WireHandler& handler, std::string host = "127.0.0.1", std::uint16_t port = 0)
      : handler_(handler) {
    udp_ = detail::Fd(::socket(AF_INET, SOCK_DGRAM | SOCK_CLOEXEC, 0));
    tcp_ = detail::Fd(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
    if (udp_.get() < 0 || tcp_.get() < 0) throw Error(ErrorCode::StartupError, "socket() failed");
    const int one = 1;
    ::setsockopt(tcp_.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    auto sa = detail::to_sockaddr(Endpoint{host, port});
    if (::bind(udp_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0) {
      throw Error(ErrorCode::StartupError, "cannot bind UDP " + host + ": " + std::strerror(errno));
    }
    socklen_t len = sizeof sa;
    ::getsockname(udp_.get(), reinterpret_cast<sockaddr*>(&sa), &len);
    endpoint_ = Endpoint{host, ntohs(sa.sin_port)};
    if (::bind(tcp_.get(), reinterpret_cast<sockaddr*>(&sa), sizeof sa) != 0 || ::listen(tcp_.get(), 64) != 0) {
      throw Error(ErrorCode::StartupError, "cannot bind TCP " + endpoint_.to_string() + ": " + std::strerror(errno));
    }
    if (::pipe2(wake_, O_CLOEXEC) != 0) throw Error(ErrorCode::StartupError, "pipe() failed");
    thread_ = std::thread([this] { loop(); });
  }

  DnsSocketServer(const DnsSocketServer&) = delete;
  DnsSocketServer& operator=(const DnsSocketServer&) = delete;

  ~DnsSocketServer() { stop(); }

  void stop() {
    if (!thread_.joinable()) return;
    stopping_ = true;
    const char b = 1;
    [[maybe_unused]] auto w = ::write(wake_[1], &b, 1);
    thread_.join();
    ::close(wake_[0]);
    ::close(wake_[1]);
  }

  const Endpoint& endpoint() const { return endpoint_; }

 private:
  void loop() {
    std::vector<std::uint8_t> buf(65535);
    while (!stopping_) {
      pollfd fds[3] = {{udp_.get(), POLLIN, 0}, {tcp_.get(), POLLIN, 0}, {wake_[0], POLLIN, 0}};
      if (::poll(fds, 3, -1) < 0) {
        if (errno == EINTR) continue;
        return;
      }
      if (fds[2].revents) return;
      if (fds[0].revents & POLLIN) {
        sockaddr_in from{};
        socklen_t flen = sizeof from;
        const auto n = ::recvfrom(udp_.get(), buf.data(), buf.size(), 0, reinterpret_cast<sockaddr*>(&from), &flen);
        if (n > 0) {
          const auto reply = handler_.handle_wire(std::span<const std::uint8_t>(buf.data(), std::size_t(n)), false);
          if (reply) {
            ::sendto(udp_.get(), reply->data(), reply->size(), 0, reinterpret_cast<sockaddr*>(&from), flen);
          }
        }
      }
      if (fds[1].revents & POLLIN) serve_tcp();
    }
  }

  void serve_tcp() {
    detail::Fd conn(::accept4(tcp_.get(), nullptr, nullptr, SOCK_CLOEXEC));
    if (conn.get() < 0) return;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
    std::uint8_t len_buf[2];
    if (!detail::read_exact(conn.get(), len_buf, 2, deadline)) return;
    std::vector<std::uint8_t> body(static_cast<std::size_t>((len_buf[0] << 8) | len_buf[1]));
    if (!detail::read_exact(conn.get(), body.data(), body.size(), deadline)) return;
    const auto reply = handler_.handle_wire(body, true);
    if (!reply) return;
    std::vector<std::uint8_t> framed;
    detail::put16(framed, static_cast<std::uint16_t>(reply->size()));
    framed.insert(framed.end(), reply->begin(), reply->end());
    detail::write_all(conn.get(), framed.data(), framed.size());
  }

  WireHandler& handler_;
  detail::Fd udp_;
  detail::Fd tcp_;
  int wake_[2] = {-1, -1};
  Endpoint endpoint_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

/// Random 16-bit query IDs for live use; the simulation injects a seeded source.
class QueryIdSource {
 public:
  explicit QueryIdSource(std::uint64_t seed = std::random_device{}()) : rng_(seed) {}
  std::uint16_t next() {
    std::lock_guard lock(mu_);
    return static_cast<std::uint16_t>(rng_());
  }

 private:
  std::mutex mu_;
  std::mt19937 rng_;
};

}  // namespace darkdns::dns
