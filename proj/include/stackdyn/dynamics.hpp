#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "stackdyn/oracle.hpp"

namespace stackdyn {

// Step-size schedule, indexed from k = 1.
struct Schedule {
  enum class Kind { constant, polynomial, exponential };
  Kind kind = Kind::constant;
  double gamma = 0.1;
  double p = 1.0;    // polynomial: gamma * k^(-p)
  double nu = 1.0;   // exponential: gamma * nu^k

  double value(long k) const;

  static Schedule constant(double g) { return {Kind::constant, g, 0.0, 1.0}; }
  static Schedule polynomial(double g, double p) { return {Kind::polynomial, g, p, 1.0}; }
  static Schedule exponential(double g, double nu) { return {Kind::exponential, g, 0.0, nu}; }
};

// Symbolic check that the leader schedule decays strictly faster than the
// follower's, i.e. gamma1_k / gamma2_k -> 0.
bool timescale_separated(const Schedule& leader, const Schedule& follower);

struct NoiseModel {
  enum class Kind { none, gaussian };
  Kind kind = Kind::none;
  std::array<double, 2> sigma{0.0, 0.0};  // per-player standard deviations
  std::uint64_t seed = 0;                 // folded into the run's stream seed
};

struct SimGradRule {};

struct StackelbergRule {
  double eta = 0.0;
  SolveConfig solve{};  // default: 5-iteration budget, warm-started by the run loop
};

struct LolaRule {};

struct BestResponseRule {
  double inner_tol = 1e-10;
  int inner_max_iters = 100000;
  double inner_step = 0.1;
};

using UpdateRule = std::variant<SimGradRule, StackelbergRule, LolaRule, BestResponseRule>;

// The field whose norm drives stopping: the Stackelberg field for leader-aware
// rules, the simultaneous field otherwise.
bool rule_uses_stackelberg_field(const UpdateRule& rule);

struct RunConfig {
  UpdateRule rule = SimGradRule{};
  std::array<Schedule, 2> schedules{Schedule::constant(0.1), Schedule::constant(0.1)};
  NoiseModel noise{};
  JointPoint x0;
  long max_iters = 1000;
  double stop_grad_tol = 1e-8;  // deterministic runs only; noise disables stopping
  long record_every = 1;
  std::uint64_t seed = 0;
};

// Optional cross-step state for step(): warm start for the leader solve, and
// the driving field at x as a byproduct.
struct StepAux {
  VectorXd warm;
  std::optional<JointPoint> field;
};

// One update of the chosen rule at iteration k (k >= 1):
//   SimGrad:     x_i+ = x_i - gamma_i (D_i f_i + w_i)
//   Stackelberg: x1+  = x1 - gamma_1 (Df1_eta + w1),  x2+ = x2 - gamma_2 (D2 f2 + w2)
//   LOLA:        x1+  = x1 - gamma_1 (D1 f1 - gamma_2 (D21 f2)^T D2 f1 + w1)
//   BestResponse: follower runs plain gradient descent to inner_tol, then the
//                 leader steps along the Stackelberg field on the response curve.
JointPoint step(const UpdateRule& rule, const GameOracle& g, const JointPoint& x, long k,
                const std::array<Schedule, 2>& schedules, const JointPoint& noise_draw,
                StepAux* aux = nullptr);

enum class StopReason { converged, max_iters, numerical_failure };
const char* to_string(StopReason r);

struct TrajectoryRecord {
  long k;
  JointPoint x;
  double f1, f2;
  double grad_norm;  // driving-field norm at x
  double tau;        // gamma_1,k / gamma_2,k
};

struct Trajectory {
  std::vector<TrajectoryRecord> records;
  StopReason reason = StopReason::max_iters;
  long terminal_k = 0;
  JointPoint terminal;
  double terminal_grad_norm = 0.0;
  std::vector<std::string> warnings;
};

// Iterates the rule from x0. Records at k = 0 and every record_every steps;
// a tolerance stop appends the terminal row. Noise draws derive from
// (seed, noise-stream, noise.seed), so equal configs replay identically.
Trajectory run(const RunConfig& config, const GameOracle& g);

// run() with the BestResponse rule; the follower solve must reach inner_tol at
// the initial point or FollowerNonconvergence is thrown. Every record's x2
// best-responds to its x1.
Trajectory run_best_response(const RunConfig& config, const GameOracle& g);

struct LockInSpec {
  JointPoint target;
  double epsilon = 0.1;
  long n0 = 0;       // conditioning iteration; replicas start in the ball at n0 = 0
  long n_bar = 0;    // start of the containment window
  double q0 = 0.1;   // initialization ball radius; 0 starts replicas at the target
  int replicas = 100;
};

struct LockInEstimate {
  double p_hat = 0.0;
  double ci_low = 0.0, ci_high = 0.0;  // 95% Wilson interval
  int successes = 0;
  int replicas = 0;
};

// Per-replica sup of ||x_n - target|| over n in [n_bar, max_iters]; replica r
// draws its start from (seed, init-stream, r) and its noise from
// (seed, noise-stream, r). Numerical failure maps to +inf.
std::vector<double> lockin_sup_distances(const RunConfig& config, const GameOracle& g,
                                         const LockInSpec& spec);

// Empirical lock-in probability: fraction of replicas whose window sup stays
// within epsilon, with a 95% Wilson interval.
LockInEstimate monte_carlo_lockin(const RunConfig& config, const GameOracle& g,
                                  const LockInSpec& spec);

LockInEstimate wilson_interval(int successes, int replicas);

}  // namespace stackdyn
