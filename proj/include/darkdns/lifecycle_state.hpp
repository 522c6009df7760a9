#pragma once

#include <array>
#include <string>
#include <string_view>

#include "darkdns/error.hpp"

namespace darkdns {

enum class LifecycleState {
  Candidate,
  ConfirmedNrd,
  Misclassified,
  RdapFailed,
  InZone,
  Transient,
  EarlyRemoved,
};

inline constexpr std::array<LifecycleState, 7> kAllLifecycleStates = {
    LifecycleState::Candidate,  LifecycleState::ConfirmedNrd, LifecycleState::Misclassified,
    LifecycleState::RdapFailed, LifecycleState::InZone,       LifecycleState::Transient,
    LifecycleState::EarlyRemoved};

constexpr std::string_view to_string(LifecycleState s) {
  switch (s) {
    case LifecycleState::Candidate: return "CANDIDATE";
    case LifecycleState::ConfirmedNrd: return "CONFIRMED_NRD";
    case LifecycleState::Misclassified: return "MISCLASSIFIED";
    case LifecycleState::RdapFailed: return "RDAP_FAILED";
    case LifecycleState::InZone: return "IN_ZONE";
    case LifecycleState::Transient: return "TRANSIENT";
    case LifecycleState::EarlyRemoved: return "EARLY_REMOVED";
  }
  return "?";
}

inline LifecycleState lifecycle_state_from_string(std::string_view s) {
  for (const auto st : kAllLifecycleStates) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::ParseError, "unknown lifecycle state '" + std::string(s) + "'");
}

/// IN_ZONE is not terminal: it may still become EARLY_REMOVED.
constexpr bool is_terminal(LifecycleState s) {
  return s == LifecycleState::Misclassified || s == LifecycleState::RdapFailed ||
         s == LifecycleState::Transient || s == LifecycleState::EarlyRemoved;
}

constexpr bool can_transition(LifecycleState from, LifecycleState to) {
  using S = LifecycleState;
  switch (from) {
    case S::Candidate: return to == S::ConfirmedNrd || to == S::Misclassified || to == S::RdapFailed;
    case S::ConfirmedNrd: return to == S::InZone || to == S::Transient;
    case S::InZone: return to == S::EarlyRemoved;
    default: return false;
  }
}

}  // namespace darkdns
