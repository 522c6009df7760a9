#pragma once

#include <atomic>
#include <algorithm>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "darkdns/clock.hpp"
#include "darkdns/http.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/sim/scenario.hpp"

namespace darkdns::sim {

/// Serves "/<tld>/domain/<name>" from the scripted registry.
class MockRdapService {
 public:
  MockRdapService(const World& world, const Clock& clock) : world_(world), clock_(clock) {}

  HttpResponse respond(const std::string& path) {
    const auto marker = path.find("/domain/");
    HttpResponse r;
    r.headers["Content-Type"] = "application/rdap+json";
    if (marker == std::string::npos) {
      r.status = 400;
      return r;
    }
    const std::string name = path.substr(marker + 8);
    {
      std::lock_guard lock(mu_);
      ++hits_[name];
      ++total_;
      requests_.emplace_back(path.substr(0, marker), clock_.now());
    }
    const auto* t = world_.find(name);
    if (!t || !t->rdap_available_at(clock_.now())) {
      r.status = 404;
      r.body = R"({"errorCode":404,"title":"Not Found"})";
      return r;
    }
    nlohmann::ordered_json body;
    body["objectClassName"] = "domain";
    body["ldhName"] = name;
    body["status"] = {"active"};
    body["events"] = {{{"eventAction", "registration"}, {"eventDate", format_rfc3339(t->registration_ts)}}};
    body["entities"] = {{{"objectClassName", "entity"},
                         {"roles", {"registrar"}},
                         {"vcardArray", {"vcard", {{"version", nlohmann::json::object(), "text", "4.0"},
                                                   {"fn", nlohmann::json::object(), "text", t->registrar_name}}}},
                         {"publicIds", {{{"type", "IANA Registrar ID"}, {"identifier", std::to_string(t->registrar_iana_id)}}}}}};
    r.status = 200;
    r.body = body.dump();
    return r;
  }

  std::uint64_t hits(const std::string& domain) const {
    std::lock_guard lock(mu_);
    const auto it = hits_.find(domain);
    return it == hits_.end() ? 0 : it->second;
  }
  std::map<std::string, std::uint64_t> all_hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }
  std::uint64_t total() const {
    std::lock_guard lock(mu_);
    return total_;
  }

  /// Largest number of requests to one endpoint inside any window of `span`.
  std::uint64_t max_requests_in(Duration span) const {
    std::lock_guard lock(mu_);
    std::map<std::string, std::vector<Timestamp>> by_endpoint;
    for (const auto& [ep, at] : requests_) by_endpoint[ep].push_back(at);
    std::uint64_t best = 0;
    for (auto& [ep, times] : by_endpoint) {
      std::sort(times.begin(), times.end());
      std::size_t lo = 0;
      for (std::size_t hi = 0; hi < times.size(); ++hi) {
        while (times[hi] - times[lo] >= span) ++lo;
        best = std::max<std::uint64_t>(best, hi - lo + 1);
      }
    }
    return best;
  }

 private:
  const World& world_;
  const Clock& clock_;
  mutable std::mutex mu_;
  std::map<std::string, std::uint64_t> hits_;
  std::uint64_t total_ = 0;
  std::vector<std::pair<std::string, Timestamp>> requests_;
};

/// Routes requests straight to the service without sockets.
class InProcessHttpTransport final : public HttpTransport {
 public:
  explicit InProcessHttpTransport(MockRdapService& service) : service_(service) {}
  HttpResult get(const std::string& url) override {
    HttpResult out;
    out.response = service_.respond(split_url(url).second);
    return out;
  }

 private:
  MockRdapService& service_;
};

/// The same service on a loopback HTTP port.
class MockRdapServer {
 public:
  explicit MockRdapServer(MockRdapService& service, const std::string& host = "127.0.0.1") {
    server_.Get(R"(/.*)", [&service](const httplib::Request& req, httplib::Response& res) {
      const auto r = service.respond(req.path);
      res.status = r.status;
      res.set_content(r.body, "application/rdap+json");
    });
    port_ = server_.bind_to_any_port(host);
    if (port_ <= 0) throw Error(ErrorCode::StartupError, "cannot bind mock RDAP server on " + host);
    host_ = host;
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  MockRdapServer(const MockRdapServer&) = delete;
  MockRdapServer& operator=(const MockRdapServer&) = delete;
  ~MockRdapServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url(const std::string& tld) const {
    return "http://" + host_ + ":" + std::to_string(port_) + "/" + tld + "/";
  }

 private:
  httplib::Server server_;
  std::string host_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace darkdns::sim
