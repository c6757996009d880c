#include "lpflow/error.hpp"

namespace lpflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SingularityDetected: return "SingularityDetected";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::StepSizeUnderflow: return "StepSizeUnderflow";
    case ErrorCode::NoReturn: return "NoReturn";
    case ErrorCode::LeftDomain: return "LeftDomain";
    case ErrorCode::NewtonDiverged: return "NewtonDiverged";
    case ErrorCode::NonTransversalSection: return "NonTransversalSection";
    case ErrorCode::NotASaddle: return "NotASaddle";
    case ErrorCode::PerpendicularPair: return "PerpendicularPair";
    case ErrorCode::NotADissipativeSaddle: return "NotADissipativeSaddle";
    case ErrorCode::MissingDirections: return "MissingDirections";
    case ErrorCode::NotContained: return "NotContained";
    case ErrorCode::BadPartition: return "BadPartition";
    case ErrorCode::ZeroAngle: return "ZeroAngle";
    case ErrorCode::EqualEigenvalues: return "EqualEigenvalues";
    case ErrorCode::NotDissipative: return "NotDissipative";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::DenominatorNonpositive: return "DenominatorNonpositive";
    case ErrorCode::PeriodTooShort: return "PeriodTooShort";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace lpflow
