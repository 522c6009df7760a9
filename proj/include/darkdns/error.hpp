#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace darkdns {

enum class ErrorCode {
  MalformedName,
  NoMatchingSuffix,
  NameIsSuffix,
  MalformedEvent,
  UnknownTld,
  ParseError,
  DuplicateSnapshot,
  MissingSnapshot,
  ApproximateMembership,
  DomainMismatch,
  AlreadyEnrolled,
  IllegalTransition,
  MissingProbeData,
  MissingDeletionDate,
  InvalidParams,
  HarnessFailure,
  ConfigError,
  StartupError,
  CorruptCheckpoint,
  SinkUnavailable,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedName: return "MalformedName";
    case ErrorCode::NoMatchingSuffix: return "NoMatchingSuffix";
    case ErrorCode::NameIsSuffix: return "NameIsSuffix";
    case ErrorCode::MalformedEvent: return "MalformedEvent";
    case ErrorCode::UnknownTld: return "UnknownTld";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateSnapshot: return "DuplicateSnapshot";
    case ErrorCode::MissingSnapshot: return "MissingSnapshot";
    case ErrorCode::ApproximateMembership: return "ApproximateMembership";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::AlreadyEnrolled: return "AlreadyEnrolled";
    case ErrorCode::IllegalTransition: return "IllegalTransition";
    case ErrorCode::MissingProbeData: return "MissingProbeData";
    case ErrorCode::MissingDeletionDate: return "MissingDeletionDate";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::HarnessFailure: return "HarnessFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::StartupError: return "StartupError";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::SinkUnavailable: return "SinkUnavailable";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so callers
/// (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace darkdns
