#include "regkit/core/error.hpp"

namespace regkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NoCorrespondences: return "NoCorrespondences";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    case ErrorCode::NoCorrespondencesInRange: return "NoCorrespondencesInRange";
    case ErrorCode::NonFiniteEnergy: return "NonFiniteEnergy";
    case ErrorCode::EmptyCrop: return "EmptyCrop";
    case ErrorCode::EmptyNeighborhood: return "EmptyNeighborhood";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::AlreadyCorrected: return "AlreadyCorrected";
    case ErrorCode::StaleFrame: return "StaleFrame";
    case ErrorCode::OverlapUnachievable: return "OverlapUnachievable";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace regkit
