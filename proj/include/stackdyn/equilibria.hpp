#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "stackdyn/linops.hpp"
#include "stackdyn/oracle.hpp"
#include "stackdyn/point.hpp"

namespace stackdyn {

enum class FieldKind { sim, stackelberg };

// Critical point found by the multi-start search, with residuals of both
// fields evaluated at the found point. basin_seed is the start that led here.
struct CriticalPoint {
  JointPoint x;
  double residual_sim = 0.0;
  double residual_stack = 0.0;  // +inf when the follower Hessian is singular
  JointPoint basin_seed;
};

struct FindConfig {
  FieldKind field = FieldKind::sim;
  double eta = 0.0;              // regularizer for the stackelberg field
  int n_starts = 64;
  int max_newton_iters = 80;
  double tol = 1e-9;             // accept when ||field|| < tol
  double dedup_radius = 1e-4;
  std::uint64_t seed = 0;
};

// box: per-coordinate [lo, hi] over the flattened joint vector (d1 then d2).
std::vector<CriticalPoint> find_critical_points(const GameOracle& g,
                                                const std::vector<std::array<double, 2>>& box,
                                                const FindConfig& cfg);

// Verdict on a symmetric operator's definiteness. The zero band is
// tol * (1 + max|eig|); "marginal" means some eigenvalue landed inside it.
struct DefinitenessVerdict {
  bool positive_definite = false;
  bool positive_semidefinite = false;
  bool marginal = false;
  double min_eig = 0.0;
  double band = 0.0;
};

// Verdict on a (possibly nonsymmetric) spectrum lying in the open right
// half-plane with margin band = tol * (1 + max|eig|).
struct StabilityVerdict {
  bool stable = false;
  bool marginal = false;
  double min_real = 0.0;
  double band = 0.0;
};

struct Classification {
  bool is_dne = false;            // critical for omega, both Hessians PD
  bool is_dse = false;            // critical for omega_S, S1 and D2^2 f2 PD
  bool stable_simgrad = false;    // spec(J) in open RHP
  bool stable_stackelberg = false;// spec(J_S) in open RHP
  bool non_nash_attractor = false;// critical + stable for simgrad, not a DNE
  bool marginal = false;          // some verdict fell inside its zero band

  double residual_sim = 0.0;
  double residual_stack = 0.0;

  SpectrumReport spec_j;          // game Jacobian
  SpectrumReport spec_js;         // Stackelberg Jacobian (FD)
  SpectrumReport spec_hess1;      // D1^2 f1
  SpectrumReport spec_hess2;      // D2^2 f2
  SpectrumReport spec_schur;      // S1 = D1^2f1 - D12f1 (D2^2f2 + eta I)^-1 D21f2

  DefinitenessVerdict hess1;
  DefinitenessVerdict hess2;
  DefinitenessVerdict schur;
  StabilityVerdict sim_stability;
  StabilityVerdict stack_stability;

  bool degenerate_stack = false;  // follower Hessian singular at eta = 0
  double tol_eig = 0.0;
  double tol_residual = 0.0;
};

struct ClassifyConfig {
  double eta = 0.0;
  double tol_eig = 1e-6;
  double tol_residual = 1e-5;  // scaled by (1 + ||x||); 10x for approximate oracles
};

Classification classify(const GameOracle& g, const JointPoint& x,
                        const ClassifyConfig& cfg = {});

// Zero-sum gate + stable-DNE gate, then checks the point is also a
// differential Stackelberg equilibrium and an attractor of the Stackelberg
// dynamics. Throws GateError naming the failed gate.
struct StackelbergCoincidence {
  bool is_dse = false;
  bool stable_stackelberg = false;
  Classification detail;
};

StackelbergCoincidence verify_stable_nash_is_stackelberg(const GameOracle& g,
                                                         const JointPoint& x,
                                                         const ClassifyConfig& cfg = {},
                                                         std::uint64_t probe_seed = 0);

// Spectral data at a non-Nash attractor of the simultaneous dynamics with
// positive-definite follower curvature, plus the necessary margin test
// kappa^2 lambda_i + mu_i > 0 for i in {1..r-p}.
struct ConditionReport {
  double kappa = 0.0;              // ||D21 f2||_2 (or caller override)
  std::vector<double> mu;          // eigs of D1^2 f1, ascending
  std::vector<double> lambda;      // eigs of D2^2 f2, descending
  int r_neg = 0;                   // count of strictly negative mu
  int p_ker = 0;                   // count of |mu| within the zero band
  std::vector<double> margins;     // kappa^2 lambda_i + mu_i, i in {1..r-p}
  bool necessary_holds = false;

  // Filled by attractor_sufficient_structure only.
  bool structure_holds = false;    // D12 f1 diagonal in the shared eigenbasis
  bool sufficient_holds = false;   // structure_holds && necessary_holds
  double structure_offdiag = 0.0;  // largest off-diagonal magnitude found
};

struct AttractorCheckConfig {
  double tol_eig = 1e-6;
  double structure_tol = 1e-8;
  std::optional<double> kappa_override;
};

ConditionReport attractor_necessary_conditions(const GameOracle& g,
                                               const JointPoint& x,
                                               const AttractorCheckConfig& cfg = {});

ConditionReport attractor_sufficient_structure(const GameOracle& g,
                                               const JointPoint& x,
                                               const AttractorCheckConfig& cfg = {});

// Scalar-game specialization: any non-Nash attractor with positive follower
// curvature is a differential Stackelberg equilibrium. Gates on d1 = d2 = 1,
// zero-sum, and the attractor conditions; throws GateError otherwise.
StackelbergCoincidence verify_scalar_attractor_is_stackelberg(const GameOracle& g,
                                                              const JointPoint& x,
                                                              const ClassifyConfig& cfg = {},
                                                              std::uint64_t probe_seed = 0);

// At an omega-critical point with vanishing leader curvature (||D1^2 f1|| <
// tol), reports whether the Stackelberg Jacobian is at least marginally
// stable (spectrum in the closed RHP within the band).
struct RealizabilityReport {
  bool realizable = false;       // ||D1^2 f1|| below tol
  bool marginal_stack = false;   // spec(J_S) >= -band elementwise in re
  double leader_curvature_norm = 0.0;
};

RealizabilityReport check_realizable(const GameOracle& g, const JointPoint& x,
                                     double tol = 1e-6);

// Compares the leader's cost at Stackelberg equilibria against the best
// (lowest) leader cost over the supplied Nash points.
struct LeaderCostComparison {
  double best_nash_cost = 0.0;
  std::vector<double> stackelberg_costs;
  std::vector<bool> violates;     // cost exceeds best_nash_cost + tol
  bool any_violation = false;
};

LeaderCostComparison leader_cost_comparison(const GameOracle& g,
                                            const std::vector<JointPoint>& nash,
                                            const std::vector<JointPoint>& stackelberg,
                                            double tol = 1e-8);

}  // namespace stackdyn
