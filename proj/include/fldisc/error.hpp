#pragma once

#include <stdexcept>
#include <string>

namespace fldisc {

enum class ErrorCode {
  NotSkew,
  NotRotation,
  AngleAtPi,
  NonFinite,
  InvalidArgument,
  DimensionMismatch,
  OutsideChart,
  SingularFeedback,
  WrongDimensions,
  NoConvergence,
  NotLinearityPreserving,
  Uncontrollable,
  MultiInputUnsupported,
  SingularStep,
  StepUnderflow,
  UnknownSystem,
  IoFailure,
};

const char* to_string(ErrorCode code);

// All library failures are reported through this type; `code()` identifies the
// failure class so callers (the CLI in particular) can map it to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fldisc
