#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lpflow {

/// Failure categories raised across the toolkit. The CLI maps groups of
/// these onto stable process exit codes.
enum class ErrorCode {
  SingularityDetected,
  OutOfDomain,
  StepSizeUnderflow,
  NoReturn,
  LeftDomain,
  NewtonDiverged,
  NonTransversalSection,
  NotASaddle,
  PerpendicularPair,
  NotADissipativeSaddle,
  MissingDirections,
  NotContained,
  BadPartition,
  ZeroAngle,
  EqualEigenvalues,
  NotDissipative,
  Infeasible,
  DenominatorNonpositive,
  PeriodTooShort,
  InvalidArgument,
  ConfigError,
  ParseError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace lpflow
