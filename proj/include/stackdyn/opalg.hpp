#pragma once

#include "stackdyn/linops.hpp"
#include "stackdyn/oracle.hpp"

namespace stackdyn {

// Game Jacobian of the simultaneous field at x, as a matrix-free map on the
// joint space:
//   [ D1^2 f1   D12 f1 ]
//   [ D21 f2    D2^2 f2 ]
LinearMap jacobian_simgrad(const GameOracle& g, const JointPoint& x);

// Jacobian of the Stackelberg field, estimated by central differences of
// omega_stackelberg (the field's inner solve hides third derivatives from the
// oracle surface). Dense by construction; dimension must fit the cap.
// Solves inside the differenced fields run at classification-grade budget.
MatrixXd jacobian_stackelberg(const GameOracle& g, const JointPoint& x, double eta = 0.0,
                              double fd_step = 1e-4, int cap = dense_cap());

// Leader Schur complement S1 = D1^2 f1 - D12 f1 (D2^2 f2 + eta I)^{-1} D21 f2
// as a matrix-free map; every apply runs one inner CG at classification-grade
// budget. symmetric_hint follows the zero-sum flag.
LinearMap schur_complement(const GameOracle& g, const JointPoint& x, double eta = 0.0);

}  // namespace stackdyn
