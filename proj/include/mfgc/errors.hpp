#pragma once

#include <stdexcept>
#include <string>

namespace mfgc {

// Base class for numerical failures of the solvers in this library.
// Input/usage mistakes throw std::invalid_argument / std::domain_error instead.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A cost callback returned a non-finite value.
struct CallbackError : SolverError {
  using SolverError::SolverError;
};

// An iteration hit its cap without meeting the tolerance.
struct NonConvergence : SolverError {
  NonConvergence(const std::string& what, double residual_, int iterations_)
      : SolverError(what), residual(residual_), iterations(iterations_) {}
  double residual = 0.0;
  int iterations = 0;
};

// A fixed-point iteration was detected to be non-contractive (stalling or
// diverging update norms).
struct NonContraction : SolverError {
  NonContraction(const std::string& what, double factor_estimate_, int iterations_)
      : SolverError(what), factor_estimate(factor_estimate_), iterations(iterations_) {}
  double factor_estimate = 0.0;
  int iterations = 0;
};

// A Newton iterate escaped the configured control bound.
struct CoercivityViolation : SolverError {
  CoercivityViolation(const std::string& what, double control_norm_)
      : SolverError(what), control_norm(control_norm_) {}
  double control_norm = 0.0;
};

// Malformed or out-of-schema experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mfgc
