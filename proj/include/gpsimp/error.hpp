#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpsimp {

enum class ErrorKind {
  // input / data errors
  MalformedHeader,
  MalformedRecord,
  NonFiniteCoordinate,
  UnsupportedFormat,
  EmptyInput,
  IoFailure,
  EmptyCloud,
  InvalidArgument,
  NonPositiveRadius,
  KOutOfRange,
  CoincidentPoints,
  GraphTooSmall,
  NodeNotInBasis,
  UnsupportedNu,
  LengthMismatch,
  BatchTooLarge,
  TargetTooLarge,
  EmptyQuery,
  // numerical failures
  ConvergenceFailure,
  FactorStale,
  IndefiniteBlock,
  NonFiniteObjective,
  DegenerateCorrespondences,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "MalformedHeader";
    case ErrorKind::MalformedRecord: return "MalformedRecord";
    case ErrorKind::NonFiniteCoordinate: return "NonFiniteCoordinate";
    case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::EmptyCloud: return "EmptyCloud";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorKind::KOutOfRange: return "KOutOfRange";
    case ErrorKind::CoincidentPoints: return "CoincidentPoints";
    case ErrorKind::GraphTooSmall: return "GraphTooSmall";
    case ErrorKind::NodeNotInBasis: return "NodeNotInBasis";
    case ErrorKind::UnsupportedNu: return "UnsupportedNu";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::BatchTooLarge: return "BatchTooLarge";
    case ErrorKind::TargetTooLarge: return "TargetTooLarge";
    case ErrorKind::EmptyQuery: return "EmptyQuery";
    case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorKind::FactorStale: return "FactorStale";
    case ErrorKind::IndefiniteBlock: return "IndefiniteBlock";
    case ErrorKind::NonFiniteObjective: return "NonFiniteObjective";
    case ErrorKind::DegenerateCorrespondences: return "DegenerateCorrespondences";
  }
  return "Unknown";
}

/// True for failures of a numerical procedure (as opposed to bad input).
inline bool is_numerical(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConvergenceFailure:
    case ErrorKind::FactorStale:
    case ErrorKind::IndefiniteBlock:
    case ErrorKind::NonFiniteObjective:
    case ErrorKind::DegenerateCorrespondences:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace gpsimp
