#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "darkdns/candidate.hpp"
#include "darkdns/clock.hpp"
#include "darkdns/error.hpp"
#include "darkdns/http.hpp"
#include "darkdns/rate_limiter.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"
#include "darkdns/zone_store.hpp"

namespace darkdns {

struct RdapRecord {
  RegistrableDomain domain;
  Timestamp registration_ts;
  std::string registrar_name;
  std::optional<std::int64_t> registrar_iana_id;
  std::vector<std::string> raw_status;
  Timestamp fetched_at;
};

enum class RdapFailureCause { TooLate, NotYetSynced, NonexistentWithCert, TransportOrRateLimit };

constexpr std::string_view to_string(RdapFailureCause c) {
  switch (c) {
    case RdapFailureCause::TooLate: return "TOO_LATE";
    case RdapFailureCause::NotYetSynced: return "NOT_YET_SYNCED";
    case RdapFailureCause::NonexistentWithCert: return "NONEXISTENT_WITH_CERT";
    case RdapFailureCause::TransportOrRateLimit: return "TRANSPORT_OR_RATELIMIT";
  }
  return "?";
}

inline RdapFailureCause rdap_failure_cause_from_string(std::string_view s) {
  for (auto c : {RdapFailureCause::TooLate, RdapFailureCause::NotYetSynced, RdapFailureCause::NonexistentWithCert,
                 RdapFailureCause::TransportOrRateLimit}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::ParseError, "unknown RDAP failure cause '" + std::string(s) + "'");
}

struct RdapFailure {
  RegistrableDomain domain;
  RdapFailureCause cause = RdapFailureCause::TransportOrRateLimit;
  std::string evidence;
  /// 0 when no HTTP response was received.
  int http_status = 0;
  /// Definitive "object does not exist" answer from the server.
  bool not_found = false;
  /// Result of the historical-zone check; always set for NONEXISTENT_WITH_CERT.
  std::optional<bool> historical_presence;
  Timestamp at;
};

using RdapOutcome = std::variant<RdapRecord, RdapFailure>;

enum class Verdict { Confirmed, Misclassified };

constexpr std::string_view to_string(Verdict v) { return v == Verdict::Confirmed ? "CONFIRMED" : "MISCLASSIFIED"; }

struct ValidationOutcome {
  RegistrableDomain domain;
  Verdict verdict = Verdict::Confirmed;
  /// first_seen_ct - registration_ts
  Duration lag{0};
};

inline constexpr Duration kValidationTolerance = std::chrono::hours(24);

/// CONFIRMED iff the CT sighting is within 24 hours of the registration event.
inline ValidationOutcome validate(const CandidateNRD& candidate, const RdapRecord& rec) {
  if (!(candidate.domain == rec.domain)) {
    throw Error(ErrorCode::DomainMismatch, candidate.domain.full() + " vs " + rec.domain.full());
  }
  ValidationOutcome out;
  out.domain = candidate.domain;
  out.lag = candidate.first_seen_ct - rec.registration_ts;
  const Duration abs_lag = out.lag < Duration{0} ? -out.lag : out.lag;
  out.verdict = abs_lag <= kValidationTolerance ? Verdict::Confirmed : Verdict::Misclassified;
  return out;
}

// ---------------------------------------------------------------------------
// Bootstrap registry (IANA dns.json shape)

class RdapBootstrap {
 public:
  static RdapBootstrap parse(std::string_view text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("services") || !j["services"].is_array()) {
      throw Error(ErrorCode::ParseError, "RDAP bootstrap must be an object with a services array");
    }
    RdapBootstrap b;
    for (const auto& svc : j["services"]) {
      if (!svc.is_array() || svc.size() < 2 || !svc[0].is_array() || !svc[1].is_array() || svc[1].empty()) {
        throw Error(ErrorCode::ParseError, "malformed bootstrap service entry");
      }
      std::string url;
      for (const auto& u : svc[1]) {
        const auto s = u.get<std::string>();
        if (url.empty() || s.rfind("https://", 0) == 0) url = s;
      }
      for (const auto& tld : svc[0]) b.add(tld.get<std::string>(), url);
    }
    return b;
  }

  static RdapBootstrap load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::ConfigError, "cannot open RDAP bootstrap file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  void add(const std::string& tld, std::string base_url) { bases_[normalize_name(tld)] = std::move(base_url); }

  /// Tries the full public suffix, then its last label ("co.uk" -> "uk").
  std::optional<std::string> base_url(const std::string& tld) const {
    if (const auto it = bases_.find(tld); it != bases_.end()) return it->second;
    if (const auto dot = tld.rfind('.'); dot != std::string::npos) {
      if (const auto it = bases_.find(tld.substr(dot + 1)); it != bases_.end()) return it->second;
    }
    return std::nullopt;
  }

  std::string to_json_text() const {
    nlohmann::json services = nlohmann::json::array();
    for (const auto& [tld, url] : bases_) services.push_back({{tld}, {url}});
    return nlohmann::json{{"version", "1.0"}, {"services", services}}.dump();
  }

 private:
  std::map<std::string, std::string> bases_;
};

inline std::string rdap_domain_url(const std::string& base, const std::string& domain) {
  return base + (base.empty() || base.back() != '/' ? "/" : "") + "domain/" + domain;
}

/// Parses an RDAP domain object. Throws ParseError when the registration event
/// is missing or unreadable.
inline RdapRecord parse_rdap_domain(std::string_view body, const RegistrableDomain& domain, Timestamp fetched_at) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::ParseError, "RDAP body is not a JSON object");
  RdapRecord rec;
  rec.domain = domain;
  rec.fetched_at = fetched_at;
  bool have_registration = false;
  if (const auto ev = j.find("events"); ev != j.end() && ev->is_array()) {
    for (const auto& e : *ev) {
      if (e.value("eventAction", "") == "registration" && e.contains("eventDate") && e["eventDate"].is_string()) {
        rec.registration_ts = parse_rfc3339(e["eventDate"].get<std::string>());
        have_registration = true;
        break;
      }
    }
  }
  if (!have_registration) throw Error(ErrorCode::ParseError, "no registration event");

  if (const auto ents = j.find("entities"); ents != j.end() && ents->is_array()) {
    for (const auto& ent : *ents) {
      const auto roles = ent.find("roles");
      if (roles == ent.end() || !roles->is_array()) continue;
      bool registrar = false;
      for (const auto& r : *roles) registrar = registrar || (r.is_string() && r == "registrar");
      if (!registrar) continue;
      if (const auto vc = ent.find("vcardArray"); vc != ent.end() && vc->is_array() && vc->size() >= 2 &&
                                                  (*vc)[1].is_array()) {
        for (const auto& prop : (*vc)[1]) {
          if (prop.is_array() && prop.size() >= 4 && prop[0] == "fn" && prop[3].is_string()) {
            rec.registrar_name = prop[3].get<std::string>();
          }
        }
      }
      if (const auto ids = ent.find("publicIds"); ids != ent.end() && ids->is_array()) {
        for (const auto& id : *ids) {
          if (id.value("type", "") != "IANA Registrar ID") continue;
          const auto& ident = id["identifier"];
          if (ident.is_number_integer()) {
            rec.registrar_iana_id = ident.get<std::int64_t>();
          } else if (ident.is_string()) {
            try {
              rec.registrar_iana_id = std::stoll(ident.get<std::string>());
            } catch (const std::exception&) {
            }
          }
        }
      }
      break;
    }
  }
  if (const auto st = j.find("status"); st != j.end() && st->is_array()) {
    for (const auto& s : *st) {
      if (s.is_string()) rec.raw_status.push_back(s.get<std::string>());
    }
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Client

/// One request per fetch, no retries; every failure becomes an RdapFailure.
class RdapClient {
 public:
  RdapClient(RdapBootstrap bootstrap, HttpTransport& http, EndpointRateLimiter& limiter, const Clock& clock)
      : bootstrap_(std::move(bootstrap)), http_(http), limiter_(limiter), clock_(clock) {}

  std::optional<std::string> endpoint_for(const RegistrableDomain& d) const { return bootstrap_.base_url(d.tld()); }

  RdapOutcome fetch_rdap(const RegistrableDomain& domain) {
    const Timestamp now = clock_.now();
    const auto base = endpoint_for(domain);
    if (!base) return failure(domain, now, 0, "no RDAP service for ." + domain.tld());
    requests_.fetch_add(1, std::memory_order_relaxed);
    const auto res = http_.get(rdap_domain_url(*base, domain.full()));
    if (!res.response) return failure(domain, now, 0, "transport error: " + res.transport_error);
    const auto& r = *res.response;
    if (r.status == 404) {
      auto f = failure(domain, now, 404, "HTTP 404: object not found");
      f.not_found = true;
      return f;
    }
    if (r.status == 429) {
      std::string evidence = "HTTP 429: rate limited";
      if (const auto it = r.headers.find("Retry-After"); it != r.headers.end()) {
        evidence += " (Retry-After: " + it->second + ")";
      }
      return failure(domain, now, 429, evidence);
    }
    if (r.status != 200) return failure(domain, now, r.status, "HTTP " + std::to_string(r.status));
    try {
      return parse_rdap_domain(r.body, domain, now);
    } catch (const Error& e) {
      return failure(domain, now, 200, std::string("malformed RDAP response: ") + e.what());
    }
  }

  /// Consults the per-endpoint limiter first; returns nullopt (and sends
  /// nothing) when the endpoint has no token available.
  std::optional<RdapOutcome> try_fetch(const RegistrableDomain& domain) {
    const auto base = endpoint_for(domain);
    if (base && !limiter_.try_acquire(*base, clock_.now())) return std::nullopt;
    return fetch_rdap(domain);
  }

  Timestamp next_allowed(const RegistrableDomain& domain) const {
    const auto base = endpoint_for(domain);
    return base ? limiter_.next_available(*base, clock_.now()) : clock_.now();
  }

  std::uint64_t requests_sent() const { return requests_.load(); }
  EndpointRateLimiter& limiter() { return limiter_; }

 private:
  static RdapFailure failure(const RegistrableDomain& d, Timestamp at, int status, std::string evidence) {
    RdapFailure f;
    f.domain = d;
    f.cause = RdapFailureCause::TransportOrRateLimit;
    f.http_status = status;
    f.evidence = std::move(evidence);
    f.at = at;
    return f;
  }

  RdapBootstrap bootstrap_;
  HttpTransport& http_;
  EndpointRateLimiter& limiter_;
  const Clock& clock_;
  std::atomic<std::uint64_t> requests_{0};
};

/// Evidence gathered by the single delayed re-probe.
struct DelayedProbeEvidence {
  bool refetch_succeeded = false;
  std::optional<Timestamp> refetch_registration_ts;
  /// Whether the most recent TLD-authoritative NS probe still returned delegation data.
  bool domain_resolving = false;
  std::string detail;
};

/// Refines a definitive not-found into one of the three causes.
/// Returns nullopt when the domain never appeared historically and the delayed
/// re-probe has not happened yet; the caller schedules it and calls again.
inline std::optional<RdapFailure> classify_failure(const RegistrableDomain& domain, const RdapFailure& fetch_failure,
                                                   const HistoricalZoneView& historical, Date cutoff,
                                                   const std::optional<DelayedProbeEvidence>& evidence) {
  RdapFailure out = fetch_failure;
  out.domain = domain;
  if (!fetch_failure.not_found) return out;
  const bool existed = historical.existed_before(domain.tld(), domain.label(), cutoff);
  out.historical_presence = existed;
  if (existed) {
    out.cause = RdapFailureCause::NonexistentWithCert;
    out.evidence = "not found; present in zone snapshots before " + format_date(cutoff);
    return out;
  }
  if (!evidence) return std::nullopt;
  if (evidence->refetch_succeeded || evidence->domain_resolving) {
    out.cause = RdapFailureCause::NotYetSynced;
    out.evidence = evidence->refetch_succeeded ? "delayed re-probe found the object" : "still delegated at re-probe";
  } else {
    out.cause = RdapFailureCause::TooLate;
    out.evidence = "not found at re-probe and no longer delegated";
  }
  if (!evidence->detail.empty()) out.evidence += "; " + evidence->detail;
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const RdapRecord& r) {
  nlohmann::json j;
  j["domain"] = r.domain.full();
  j["registration_ts"] = format_rfc3339(r.registration_ts);
  j["registrar_name"] = r.registrar_name;
  j["registrar_iana_id"] = r.registrar_iana_id ? nlohmann::json(*r.registrar_iana_id) : nlohmann::json(nullptr);
  j["raw_status"] = r.raw_status;
  j["fetched_at"] = format_rfc3339(r.fetched_at);
  return j;
}

inline RdapRecord rdap_record_from_json(const nlohmann::json& j) {
  RdapRecord r;
  r.domain = registrable_from_full(j.at("domain").get<std::string>());
  r.registration_ts = parse_rfc3339(j.at("registration_ts").get<std::string>());
  r.registrar_name = j.at("registrar_name").get<std::string>();
  if (!j.at("registrar_iana_id").is_null()) r.registrar_iana_id = j.at("registrar_iana_id").get<std::int64_t>();
  r.raw_status = j.at("raw_status").get<std::vector<std::string>>();
  r.fetched_at = parse_rfc3339(j.at("fetched_at").get<std::string>());
  return r;
}

inline nlohmann::json to_json(const RdapFailure& f) {
  nlohmann::json j;
  j["domain"] = f.domain.full();
  j["cause"] = to_string(f.cause);
  j["evidence"] = f.evidence;
  j["http_status"] = f.http_status;
  j["not_found"] = f.not_found;
  j["historical_presence"] = f.historical_presence ? nlohmann::json(*f.historical_presence) : nlohmann::json(nullptr);
  j["at"] = format_rfc3339(f.at);
  return j;
}

inline RdapFailure rdap_failure_from_json(const nlohmann::json& j) {
  RdapFailure f;
  f.domain = registrable_from_full(j.at("domain").get<std::string>());
  f.cause = rdap_failure_cause_from_string(j.at("cause").get<std::string>());
  f.evidence = j.at("evidence").get<std::string>();
  f.http_status = j.at("http_status").get<int>();
  f.not_found = j.at("not_found").get<bool>();
  if (!j.at("historical_presence").is_null()) f.historical_presence = j.at("historical_presence").get<bool>();
  f.at = parse_rfc3339(j.at("at").get<std::string>());
  return f;
}

}  // namespace darkdns
