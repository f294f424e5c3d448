#pragma once

#include <array>
#include <memory>
#include <numbers>
#include <optional>
#include <string>

#include "stackdyn/oracle.hpp"

namespace stackdyn {

// --- Cournot duopoly -------------------------------------------------------
// Firms pick quantities q_i; price P = A - q1 - q2 on the unconstrained
// branch, profit (P - c_i) q_i, cost f_i = -profit. Points with q1 + q2 > A
// leave the priced branch; callers get a warning hook via in_priced_branch.

struct DuopolyGame {
  double A = 100.0;
  double c1 = 5.0;
  double c2 = 2.0;

  std::shared_ptr<GameOracle> oracle() const;
  bool in_priced_branch(const JointPoint& q) const { return q.x1[0] + q.x2[0] <= A; }
};

struct DuopolyEquilibria {
  JointPoint nash;           // q_i = (A + c_{-i} - 2 c_i) / 3
  JointPoint stackelberg;    // q1 = (A + c2 - 2 c1) / 2, q2 = (A - q1 - c2) / 2
  double nash_profit1, nash_profit2;
  double stackelberg_profit1, stackelberg_profit2;
};

DuopolyEquilibria duopoly_equilibria(const DuopolyGame& g);

// --- Location game on a torus ----------------------------------------------
// f_i = -alpha_i cos(theta_i - phi_i) + cos(theta_i - theta_{-i});
// strategies are angles, canonicalized into (-pi, pi].

struct TorusGame {
  std::array<double, 2> alpha{1.0, 1.3};
  std::array<double, 2> phi{std::numbers::pi / 8, std::numbers::pi / 8};

  std::shared_ptr<GameOracle> oracle() const;
};

std::shared_ptr<GameOracle> torus_game(const TorusGame& g = {});

// --- Exponentially enveloped quartic zero-sum game --------------------------
// f(x) = -exp(-0.01(x1^2 + x2^2)) ((a x1^2 + x2)^2 + (b x2^2 + x1)^2),
// costs (f, -f). Gradients analytic; curvature products go through finite
// differences of the gradients, so the oracle is flagged approximate.

struct PolyZeroSumGame {
  double a = 0.15;
  double b = 0.25;

  std::shared_ptr<GameOracle> oracle() const;
};

std::shared_ptr<GameOracle> poly_zero_sum(double a = 0.15, double b = 0.25);

// --- Covariance-learning linear-quadratic GAN -------------------------------
// Leader V (generator), follower W (discriminator), both m x m:
//   f(V, W)  = <W, Sigma - V V^T>,  f1 = f,
//   f2 = -f + (eta_follower / 2) ||W||_F^2.
// eta_follower = 0 makes the game zero-sum with a singular follower Hessian.

struct CovarianceGan {
  MatrixXd sigma;            // SPD target
  double eta_follower = 0.0;

  int m() const { return static_cast<int>(sigma.rows()); }
  std::shared_ptr<GameOracle> oracle() const;
};

std::shared_ptr<GameOracle> covariance_gan(MatrixXd sigma, double eta_follower);

// Benchmark diagnostics: ||Sigma - V V^T||_2 and ||(W + W^T) / 2||_2.
struct GanMetrics {
  double sigma_err;
  double w_sym_norm;
};
GanMetrics covariance_gan_metrics(const CovarianceGan& g, const JointPoint& x);

// --- Quadratic game families -------------------------------------------------
// f_i(x) = 0.5 x1' S1_i x1 + x1' C_i x2 + 0.5 x2' S2_i x2 + l1_i'x1 + l2_i'x2.

struct QuadraticBlocks {
  struct PlayerCost {
    MatrixXd self1, self2;   // symmetric
    MatrixXd coupling;       // d1 x d2
    VectorXd lin1, lin2;
  };
  PlayerCost f1, f2;
  bool zero_sum = false;     // set when f2 == -f1 by construction
};

std::shared_ptr<GameOracle> quadratic_game(const QuadraticBlocks& blocks);

// Scalar zero-sum family: f = 0.5 a x1^2 + b x1 x2 - 0.5 c x2^2, costs (f, -f).
std::shared_ptr<GameOracle> scalar_zero_sum(double a, double b, double c);

// Zero-sum quadratic with prescribed interaction structure:
// D1^2 f = W1 M W1', -D2^2 f = W2 L W2', D12 f = W1 S W2'. Costs (f, -f).
std::shared_ptr<GameOracle> shared_eigenbasis_game(const MatrixXd& w1, const VectorXd& m_diag,
                                                   const MatrixXd& w2, const VectorXd& l_diag,
                                                   const MatrixXd& s);

struct QuadraticGameSpec {
  BlockDims dims{1, 1};
  enum class Class { zero_sum, general_sum } cls = Class::zero_sum;
  std::uint64_t seed = 0;
  double coupling_scale = 1.0;
};

// Deterministic draw: symmetric self blocks from a symmetrized standard
// normal, coupling from a scaled standard normal. Same spec, same game.
std::shared_ptr<GameOracle> random_quadratic(const QuadraticGameSpec& spec);

// --- JSON game specs ---------------------------------------------------------

struct GameHandle {
  std::string kind;
  std::shared_ptr<GameOracle> oracle;
  std::optional<DuopolyGame> duopoly;
  std::optional<CovarianceGan> covariance;
};

// Parses {"game": "duopoly"|"torus"|"poly"|"covariance"|"quadratic", ...}.
// Unknown kind or missing/invalid fields throw ContractViolation naming the field.
GameHandle parse_game(const std::string& json_text);

}  // namespace stackdyn
