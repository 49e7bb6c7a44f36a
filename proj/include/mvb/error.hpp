#pragma once

#include <stdexcept>
#include <string>

namespace mvb {

// Numeric values are shared with the C API (mvb_status); keep them stable.
enum class ErrorCode : int {
  Ok = 0,
  InvalidArgument = 10,
  ConfigError = 11,
  UnknownFamily = 12,
  Io = 13,
  SingularDiffusion = 20,
  NonFinite = 21,
  MemoryBudget = 22,
  UnequalSupport = 30,
  SizeCap = 31,
  GridMismatch = 40,
  MissingGradSigma = 41,
  ScheduleMismatch = 42,
  MeasureDependence = 43,
  UnsupportedScenario = 44,
  Internal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

// True for failures caused by the numerics (blow-up, NaN, degenerate
// diffusion) rather than by bad input.
bool is_numerical_failure(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace mvb
