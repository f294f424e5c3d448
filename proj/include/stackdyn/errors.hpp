#pragma once

#include <stdexcept>
#include <string>

namespace stackdyn {

// Caller broke an interface contract (bad player/block index, dimension
// mismatch, malformed config field).
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& what) : std::invalid_argument(what) {}
};

// A linear solve hit a (near-)singular operator. Carries the residual norm the
// solver was left with.
struct SingularOperatorError : std::runtime_error {
  double residual;
  SingularOperatorError(const std::string& what, double res)
      : std::runtime_error(what + " (residual " + std::to_string(res) + ")"), residual(res) {}
};

// CG walked into near-zero curvature: the operator is not definite enough for
// the requested solve.
struct IndefiniteOperatorError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense materialization of an operator larger than the configured cap.
struct SizeCapError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An iterative eigen/odometry routine did not converge; message says how far it got.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inner best-response optimization stalled above its tolerance.
struct FollowerNonconvergence : std::runtime_error {
  double residual;
  FollowerNonconvergence(const std::string& what, double res)
      : std::runtime_error(what + " (grad norm " + std::to_string(res) + ")"), residual(res) {}
};

// A condition check was invoked at a point that fails its gate; message names
// the gate that failed.
struct GateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Monte-Carlo lock-in estimation produced no usable replicas.
struct ConditioningFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace stackdyn
