#pragma once

#include <stdexcept>
#include <string>

namespace ilab {

/// Raised when a declarative spec (covariance, experiment config) violates its
/// constraints. The message lists every violated constraint.
struct InvalidSpecError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised by numerical solvers on failure (singular systems, iteration caps,
/// infeasible terminations). Carries the best diagnostics available at throw time.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
  SolverError(const std::string& msg, double diag) : std::runtime_error(msg), diagnostic(diag) {}
  double diagnostic = 0.0;
};

/// Raised by the boosting flow when the recorded correlation path rises beyond
/// tolerance, which signals a too-coarse step size.
struct FlowStepError : std::runtime_error {
  FlowStepError(const std::string& msg, double suggested)
      : std::runtime_error(msg), suggested_step(suggested) {}
  double suggested_step;
};

}  // namespace ilab
