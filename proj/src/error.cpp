#include "mvb/error.hpp"

namespace mvb {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::UnknownFamily: return "UnknownFamily";
    case ErrorCode::Io: return "Io";
    case ErrorCode::SingularDiffusion: return "SingularDiffusion";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::MemoryBudget: return "MemoryBudget";
    case ErrorCode::UnequalSupport: return "UnequalSupport";
    case ErrorCode::SizeCap: return "SizeCap";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MissingGradSigma: return "MissingGradSigma";
    case ErrorCode::ScheduleMismatch: return "ScheduleMismatch";
    case ErrorCode::MeasureDependence: return "MeasureDependence";
    case ErrorCode::UnsupportedScenario: return "UnsupportedScenario";
    case ErrorCode::Internal: return "Internal";
  }
  return "Unknown";
}

bool is_numerical_failure(ErrorCode code) noexcept {
  return code == ErrorCode::NonFinite || code == ErrorCode::SingularDiffusion;
}

}  // namespace mvb
