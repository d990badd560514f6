#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ezsdu {

enum class ErrorCode {
  ThetaOutOfRegime,
  IllPosed,
  OutsideD,
  DivergentFamily,
  NotSelfOrder,
  NoContraction,
  MaxIterExceeded,
  NotDominated,
  HypothesisUnmet,
  InvalidArgument,
  Config,
};

/// Machine-parsable upper-case tag, e.g. "THETA_OUT_OF_REGIME".
constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ThetaOutOfRegime: return "THETA_OUT_OF_REGIME";
    case ErrorCode::IllPosed: return "ILL_POSED";
    case ErrorCode::OutsideD: return "OUTSIDE_D";
    case ErrorCode::DivergentFamily: return "DIVERGENT_FAMILY";
    case ErrorCode::NotSelfOrder: return "NOT_SELF_ORDER";
    case ErrorCode::NoContraction: return "NO_CONTRACTION";
    case ErrorCode::MaxIterExceeded: return "MAX_ITER_EXCEEDED";
    case ErrorCode::NotDominated: return "NOT_DOMINATED";
    case ErrorCode::HypothesisUnmet: return "HYPOTHESIS_UNMET";
    case ErrorCode::InvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::Config: return "CONFIG";
  }
  return "UNKNOWN";
}

/// True for failures of an iterative numerical method, as opposed to
/// rejected inputs.
constexpr bool is_numerical_failure(ErrorCode code) {
  return code == ErrorCode::MaxIterExceeded || code == ErrorCode::NoContraction ||
         code == ErrorCode::NotSelfOrder;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ezsdu
