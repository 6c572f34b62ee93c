#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvs {

/// Failure categories surfaced by the library. The CLI maps these onto
/// process exit codes, and the enumerator name is always the first token of
/// the exception message so that callers can match on it.
enum class ErrorCode {
  InvalidArgument,
  NonPositiveHorizon,
  SingularGram,
  OutOfHorizon,
  DegenerateDenominator,
  NonFiniteState,
  NoConvergence,
  NonPositiveWealth,
  ZeroDenominatorValue,
  UnsolvedTable,
  PenaltyUndefined,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveHorizon: return "NonPositiveHorizon";
    case ErrorCode::SingularGram: return "SingularGram";
    case ErrorCode::OutOfHorizon: return "OutOfHorizon";
    case ErrorCode::DegenerateDenominator: return "DegenerateDenominator";
    case ErrorCode::NonFiniteState: return "NonFiniteState";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NonPositiveWealth: return "NonPositiveWealth";
    case ErrorCode::ZeroDenominatorValue: return "ZeroDenominatorValue";
    case ErrorCode::UnsolvedTable: return "UnsolvedTable";
    case ErrorCode::PenaltyUndefined: return "PenaltyUndefined";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvs
