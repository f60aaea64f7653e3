#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace biosonix {

enum class ErrorCode {
  InvalidArgument,
  UnknownClass,
  UnknownNode,
  OutOfBounds,
  TrajectoryMissesDomain,
  MalformedRow,
  NonUniformFrames,
  NonFiniteValue,
  StabilityInfeasible,
  UnmappedNode,
  Io,
  Config,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownClass: return "UnknownClass";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::TrajectoryMissesDomain: return "TrajectoryMissesDomain";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonUniformFrames: return "NonUniformFrames";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::StabilityInfeasible: return "StabilityInfeasible";
    case ErrorCode::UnmappedNode: return "UnmappedNode";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

// Every failure in the library surfaces as this exception; `code()` lets callers
// and tests distinguish the failure class without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Configuration failure tied to a JSON field path such as `classes[1].E_pa`.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(ErrorCode::Config, field + ": " + message), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace biosonix
