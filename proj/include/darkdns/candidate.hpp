#pragma once

#include <string>

#include "json.hpp"

#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"

namespace darkdns {

/// A potentially newly registered domain, emitted at most once per domain.
struct CandidateNRD {
  RegistrableDomain domain;
  Timestamp first_seen_ct;
  std::string source_log;

  /// One line of the candidate stream (no trailing newline).
  std::string to_json_line() const {
    nlohmann::ordered_json j;
    j["domain"] = domain.full();
    j["first_seen_ct"] = format_rfc3339(first_seen_ct);
    j["source_log"] = source_log;
    return j.dump();
  }
};

}  // namespace darkdns
