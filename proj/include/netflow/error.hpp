#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace netflow {

enum class ErrorCode {
  kDisconnectedGraph,
  kSelfLoop,
  kEndpointOutOfRange,
  kInfeasibleEdgeCount,
  kRejectionLimitExceeded,
  kUnbalancedSupply,
  kNonPositiveCoefficient,
  kDimensionMismatch,
  kSingularBeyondNullspace,
  kBacktrackExhausted,
  kParseError,
  kIOFailure,
  kEmptyInput,
  kInvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDisconnectedGraph:
      return "DisconnectedGraph";
    case ErrorCode::kSelfLoop:
      return "SelfLoop";
    case ErrorCode::kEndpointOutOfRange:
      return "EndpointOutOfRange";
    case ErrorCode::kInfeasibleEdgeCount:
      return "InfeasibleEdgeCount";
    case ErrorCode::kRejectionLimitExceeded:
      return "RejectionLimitExceeded";
    case ErrorCode::kUnbalancedSupply:
      return "UnbalancedSupply";
    case ErrorCode::kNonPositiveCoefficient:
      return "NonPositiveCoefficient";
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kSingularBeyondNullspace:
      return "SingularBeyondNullspace";
    case ErrorCode::kBacktrackExhausted:
      return "BacktrackExhausted";
    case ErrorCode::kParseError:
      return "ParseError";
    case ErrorCode::kIOFailure:
      return "IOFailure";
    case ErrorCode::kEmptyInput:
      return "EmptyInput";
    case ErrorCode::kInvalidArgument:
      return "InvalidArgument";
  }
  return "Unknown";
}

/// Exception carrying a machine-checkable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace netflow
