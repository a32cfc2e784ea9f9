#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace regkit {

enum class ErrorCode {
  ParseError,
  EmptyCloud,
  DegenerateInput,
  InvalidArgument,
  NoCorrespondences,
  TooFewCorrespondences,
  RegistrationFailed,
  NoCorrespondencesInRange,
  NonFiniteEnergy,
  EmptyCrop,
  EmptyNeighborhood,
  TooFewPairs,
  AlreadyCorrected,
  StaleFrame,
  OverlapUnachievable,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for all hard failures in the toolkit; the code
/// identifies which contract was violated.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace regkit
