#pragma once

#include <chrono>
#include <map>
#include <optional>
#include <string>

#include "httplib.h"

namespace darkdns {

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

/// Either a response (any status) or a transport-level error string.
struct HttpResult {
  std::optional<HttpResponse> response;
  std::string transport_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResult get(const std::string& url) = 0;
};

/// Splits "scheme://host[:port]/path" into origin and path.
inline std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  const auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Blocking HTTP(S) client; HTTPS requires building with CPPHTTPLIB_OPENSSL_SUPPORT.
class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout = std::chrono::seconds(10)) : timeout_(timeout) {}

  HttpResult get(const std::string& url) override {
    const auto [origin, path] = split_url(url);
    HttpResult out;
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
    if (origin.rfind("https://", 0) == 0) {
      out.transport_error = "HTTPS support not compiled in";
      return out;
    }
#endif
    httplib::Client cli(origin);
    cli.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_).count(),
                               static_cast<time_t>((timeout_.count() % 1000) * 1000));
    cli.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout_).count(),
                         static_cast<time_t>((timeout_.count() % 1000) * 1000));
    cli.set_follow_location(true);
    auto res = cli.Get(path, {{"Accept", "application/rdap+json"}});
    if (!res) {
      out.transport_error = httplib::to_string(res.error());
      return out;
    }
    HttpResponse r;
    r.status = res->status;
    r.body = res->body;
    for (const auto& [k, v] : res->headers) r.headers[k] = v;
    out.response = std::move(r);
    return out;
  }

 private:
  std::chrono::milliseconds timeout_;
};

}  // namespace darkdns
