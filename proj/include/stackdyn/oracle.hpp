#pragma once

#include <functional>
#include <memory>

#include "stackdyn/linops.hpp"
#include "stackdyn/point.hpp"

namespace stackdyn {

// First-order oracle for a two-player smooth game, plus second-order
// operator-vector products. Players and blocks are 1-indexed: player 1 leads,
// block 1 is the leader's strategy.
//
// sovp(i, j, k, x, v) applies the block (j,k) of player i's cost curvature to
// v: the directional derivative of D_j f_i along v placed in block k. Shapes:
// v lives in block k, the result in block j.
class GameOracle {
 public:
  virtual ~GameOracle() = default;

  virtual BlockDims dims() const = 0;
  virtual double cost(int player, const JointPoint& x) const = 0;
  virtual VectorXd grad(int player, int block, const JointPoint& x) const = 0;
  virtual VectorXd sovp(int player, int grad_block, int wrt_block, const JointPoint& x,
                        const VectorXd& v) const = 0;

  // True when any derivative path inside the oracle is finite-difference;
  // classification thresholds widen tenfold downstream.
  virtual bool derivatives_approximate() const { return false; }

  // True when f2 == -f1 by construction.
  virtual bool zero_sum() const { return false; }

  // Canonical representative of x (identity except for periodic strategy
  // spaces, which wrap into their fundamental domain).
  virtual JointPoint canonical(const JointPoint& x) const { return x; }

 protected:
  void check_player(int player) const {
    if (player != 1 && player != 2) throw ContractViolation("player index must be 1 or 2");
  }
  void check_block(int block) const {
    if (block != 1 && block != 2) throw ContractViolation("block index must be 1 or 2");
  }
};

struct FdConfig {
  double step = 1e-5;      // scaled by max(1, |x|_inf) at the evaluation point
  double rel_tol = 1e-6;
  double abs_tol = 1e-10;
};

inline double fd_scale(const JointPoint& x, double step) {
  return step * std::max(1.0, x.inf_norm());
}

// Simultaneous-gradient field: (D1 f1, D2 f2).
JointPoint omega(const GameOracle& g, const JointPoint& x);

struct StackelbergField {
  JointPoint value;
  VectorXd follower_solve;   // w with (D2^2 f2 + eta I) w = D2 f1; reusable warm start
  double solve_residual = 0.0;
};

// Stackelberg leader field paired with the raw follower field:
//   block 1 = D1 f1 - (D21 f2)^T (D2^2 f2 + eta I)^{-1} D2 f1
//   block 2 = D2 f2
// The inner solve runs CG under cfg. With eta = 0 the follower curvature must
// be solvable where requested; CG breakdown surfaces as SingularOperatorError.
StackelbergField omega_stackelberg_detail(const GameOracle& g, const JointPoint& x, double eta,
                                          const SolveConfig& cfg = {});
JointPoint omega_stackelberg(const GameOracle& g, const JointPoint& x, double eta = 0.0,
                             const SolveConfig& cfg = {});

struct FdCheckReport {
  bool pass = true;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
};

// Central-difference validation of grad (all players/blocks) at x.
FdCheckReport fd_grad_check(const GameOracle& g, const JointPoint& x, const FdConfig& cfg = {});

// Central-difference validation of sovp against differenced gradients along
// random directions (all player/block pairs used by the fields).
FdCheckReport fd_sovp_check(const GameOracle& g, const JointPoint& x, const FdConfig& cfg = {},
                            std::uint64_t seed = 0, int dirs_per_block = 2);

// Oracle built from cost callables alone: gradients by central differences,
// sovps by nested differences. Flagged approximate.
std::shared_ptr<GameOracle> fd_oracle_from_costs(BlockDims dims,
                                                 std::function<double(const JointPoint&)> f1,
                                                 std::function<double(const JointPoint&)> f2,
                                                 const FdConfig& cfg = {});

}  // namespace stackdyn
