#include "stackdyn/dynamics.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "stackdyn/parallel.hpp"
#include "stackdyn/rng.hpp"

namespace stackdyn {

double Schedule::value(long k) const {
  if (k < 1) throw ContractViolation("schedule: iteration index starts at 1");
  if (gamma <= 0) throw ContractViolation("schedule: gamma must be positive");
  switch (kind) {
    case Kind::constant:
      return gamma;
    case Kind::polynomial:
      if (p < 0) throw ContractViolation("schedule: polynomial exponent must be >= 0");
      return gamma * std::pow(static_cast<double>(k), -p);
    case Kind::exponential:
      if (nu <= 0 || nu > 1) throw ContractViolation("schedule: nu must lie in (0, 1]");
      return gamma * std::pow(nu, static_cast<double>(k));
  }
  throw ContractViolation("schedule: unknown kind");
}

namespace {

// Decay class: 0 = no decay, 1 = polynomial (speed = exponent), 2 = geometric.
std::pair<int, double> decay_class(const Schedule& s) {
  switch (s.kind) {
    case Schedule::Kind::constant:
      return {0, 0.0};
    case Schedule::Kind::polynomial:
      return s.p > 0 ? std::pair<int, double>{1, s.p} : std::pair<int, double>{0, 0.0};
    case Schedule::Kind::exponential:
      return s.nu < 1 ? std::pair<int, double>{2, s.nu} : std::pair<int, double>{0, 0.0};
  }
  return {0, 0.0};
}

}  // namespace

bool timescale_separated(const Schedule& leader, const Schedule& follower) {
  auto [cl, sl] = decay_class(leader);
  auto [cf, sf] = decay_class(follower);
  if (cl != cf) return cl > cf;
  if (cl == 1) return sl > sf;          // faster polynomial decay
  if (cl == 2) return sl < sf;          // smaller nu decays faster
  return false;
}

bool rule_uses_stackelberg_field(const UpdateRule& rule) {
  return std::holds_alternative<StackelbergRule>(rule) ||
         std::holds_alternative<BestResponseRule>(rule);
}

const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_iters: return "max_iters";
    case StopReason::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

// Plain gradient descent on the follower cost at fixed x1. Returns the solved
// follower block; throws FollowerNonconvergence on stall.
VectorXd best_response_inner(const GameOracle& g, const JointPoint& x, const BestResponseRule& r) {
  JointPoint y = x;
  double gn = g.grad(2, 2, y).norm();
  for (int it = 0; it < r.inner_max_iters; ++it) {
    if (gn <= r.inner_tol) return y.x2;
    y.x2 -= r.inner_step * g.grad(2, 2, y);
    if (!y.x2.allFinite())
      throw FollowerNonconvergence("best response: inner iteration diverged", gn);
    gn = g.grad(2, 2, y).norm();
  }
  if (gn <= r.inner_tol) return y.x2;
  throw FollowerNonconvergence("best response: inner iteration stalled above inner_tol", gn);
}

// Driving field at x for stopping and for the gradient part of the update.
// Stackelberg-family rules follow the leader field; SimGrad and LOLA follow
// the simultaneous field. Warm start in aux survives across calls.
JointPoint driving_field(const UpdateRule& rule, const GameOracle& g, const JointPoint& x,
                         StepAux* aux) {
  if (const auto* st = std::get_if<StackelbergRule>(&rule)) {
    SolveConfig cfg = st->solve;
    if (aux && aux->warm.size() == g.dims().d2) cfg.warm_start = aux->warm;
    StackelbergField f = omega_stackelberg_detail(g, x, st->eta, cfg);
    if (aux) aux->warm = f.follower_solve;
    return f.value;
  }
  if (std::holds_alternative<BestResponseRule>(rule)) {
    SolveConfig cfg = SolveConfig::exact(g.dims().d2);
    if (aux && aux->warm.size() == g.dims().d2) cfg.warm_start = aux->warm;
    StackelbergField f = omega_stackelberg_detail(g, x, 0.0, cfg);
    if (aux) aux->warm = f.follower_solve;
    return f.value;
  }
  return omega(g, x);
}

}  // namespace

JointPoint step(const UpdateRule& rule, const GameOracle& g, const JointPoint& x, long k,
                const std::array<Schedule, 2>& schedules, const JointPoint& noise_draw,
                StepAux* aux) {
  require_dims(x, g.dims(), "step");
  require_dims(noise_draw, g.dims(), "step noise");
  const double g1 = schedules[0].value(k);
  const double g2 = schedules[1].value(k);

  if (const auto* br = std::get_if<BestResponseRule>(&rule)) {
    JointPoint y = x;
    y.x2 = best_response_inner(g, y, *br);
    StepAux local;
    JointPoint f = driving_field(rule, g, y, aux ? aux : &local);
    if (aux) aux->field = f;
    y.x1 -= g1 * (f.x1 + noise_draw.x1);
    y.x2 = best_response_inner(g, y, *br);
    return y;
  }

  StepAux local;
  StepAux* a = aux ? aux : &local;
  JointPoint f;
  if (a->field) {
    f = *a->field;
  } else {
    f = driving_field(rule, g, x, a);
    a->field = f;
  }

  JointPoint y = x;
  if (std::holds_alternative<LolaRule>(rule)) {
    // Leader anticipates the follower's gradient step at the current rate.
    VectorXd adj = g.sovp(2, 1, 2, x, g.grad(1, 2, x));  // (D21 f2)^T D2 f1
    y.x1 -= g1 * (f.x1 - g2 * adj + noise_draw.x1);
  } else {
    y.x1 -= g1 * (f.x1 + noise_draw.x1);
  }
  y.x2 -= g2 * (f.x2 + noise_draw.x2);
  return y;
}

namespace {

struct NoiseStream {
  std::mt19937_64 rng;
  std::normal_distribution<double> gauss;
  const NoiseModel* model;
  BlockDims dims;

  JointPoint draw() {
    JointPoint w = JointPoint::Zero(dims);
    if (model->kind == NoiseModel::Kind::gaussian) {
      for (int i = 0; i < dims.d1; ++i) w.x1[i] = model->sigma[0] * gauss(rng);
      for (int i = 0; i < dims.d2; ++i) w.x2[i] = model->sigma[1] * gauss(rng);
    }
    return w;
  }
};

void validate_run_config(const RunConfig& cfg, const GameOracle& g) {
  require_dims(cfg.x0, g.dims(), "run x0");
  if (cfg.max_iters < 0) throw ContractViolation("run: max_iters must be >= 0");
  if (cfg.record_every < 1) throw ContractViolation("run: record_every must be >= 1");
  if (cfg.noise.kind == NoiseModel::Kind::gaussian &&
      (cfg.noise.sigma[0] < 0 || cfg.noise.sigma[1] < 0))
    throw ContractViolation("run: noise sigma must be >= 0");
  // surface schedule parameter errors before the loop
  cfg.schedules[0].value(1);
  cfg.schedules[1].value(1);
}

}  // namespace

Trajectory run(const RunConfig& cfg, const GameOracle& g) {
  validate_run_config(cfg, g);
  const bool noisy = cfg.noise.kind != NoiseModel::Kind::none;
  const bool stopping = !noisy && cfg.stop_grad_tol > 0;
  const auto* br = std::get_if<BestResponseRule>(&cfg.rule);

  Trajectory traj;
  if (noisy && std::holds_alternative<StackelbergRule>(cfg.rule) &&
      !timescale_separated(cfg.schedules[0], cfg.schedules[1])) {
    traj.warnings.push_back(
        "leader schedule does not decay faster than the follower's; "
        "two-timescale approximation is not valid for this pairing");
  }

  NoiseStream noise{make_rng(cfg.seed, seed_task::kNoise, cfg.noise.seed), {}, &cfg.noise,
                    g.dims()};
  StepAux aux;
  JointPoint x = cfg.x0;
  if (br) x.x2 = best_response_inner(g, x, *br);  // propagate stall at the start

  auto costs_at = [&](const JointPoint& p, double& f1, double& f2) {
    try {
      f1 = g.cost(1, p);
      f2 = g.cost(2, p);
    } catch (const std::exception&) {
      f1 = f2 = std::numeric_limits<double>::infinity();
    }
  };
  auto push_record = [&](long k, const JointPoint& p, double gn) {
    double f1, f2;
    costs_at(p, f1, f2);
    long keff = std::max<long>(k, 1);
    traj.records.push_back(
        {k, p, f1, f2, gn, cfg.schedules[0].value(keff) / cfg.schedules[1].value(keff)});
  };

  for (long n = 0;; ++n) {
    double gn;
    try {
      aux.field.reset();
      JointPoint f = driving_field(cfg.rule, g, x, &aux);
      gn = f.norm();
      aux.field = std::move(f);  // step() consumes this instead of recomputing
    } catch (const std::exception& e) {
      traj.reason = StopReason::numerical_failure;
      traj.warnings.push_back(e.what());
      traj.terminal = x;
      traj.terminal_k = n;
      traj.terminal_grad_norm = std::numeric_limits<double>::infinity();
      if (traj.records.empty() || traj.records.back().k != n)
        push_record(n, x, std::numeric_limits<double>::infinity());
      return traj;
    }

    if (n % cfg.record_every == 0) push_record(n, x, gn);
    if (stopping && gn < cfg.stop_grad_tol) {
      traj.reason = StopReason::converged;
      traj.terminal = x;
      traj.terminal_k = n;
      traj.terminal_grad_norm = gn;
      if (traj.records.back().k != n) push_record(n, x, gn);
      return traj;
    }
    if (n == cfg.max_iters) {
      traj.reason = StopReason::max_iters;
      traj.terminal = x;
      traj.terminal_k = n;
      traj.terminal_grad_norm = gn;
      return traj;
    }

    try {
      JointPoint w = noise.draw();
      JointPoint next = step(cfg.rule, g, x, n + 1, cfg.schedules, w, &aux);
      if (!next.all_finite()) throw NumericalError("run: iterate left the finite domain");
      x = std::move(next);
    } catch (const FollowerNonconvergence&) {
      throw;  // best-response stalls are contract errors, not terminal states
    } catch (const std::exception& e) {
      traj.reason = StopReason::numerical_failure;
      traj.warnings.push_back(e.what());
      traj.terminal = x;
      traj.terminal_k = n;
      traj.terminal_grad_norm = gn;
      if (traj.records.back().k != n) push_record(n, x, gn);
      return traj;
    }
  }
}

Trajectory run_best_response(const RunConfig& cfg, const GameOracle& g) {
  if (!std::holds_alternative<BestResponseRule>(cfg.rule))
    throw ContractViolation("run_best_response: rule must be BestResponse");
  return run(cfg, g);
}

std::vector<double> lockin_sup_distances(const RunConfig& cfg, const GameOracle& g,
                                         const LockInSpec& spec) {
  validate_run_config(cfg, g);
  require_dims(spec.target, g.dims(), "lockin target");
  if (spec.replicas < 1) throw ContractViolation("lockin: replicas must be >= 1");
  if (spec.epsilon <= 0) throw ContractViolation("lockin: epsilon must be positive");
  if (spec.q0 < 0) throw ContractViolation("lockin: q0 must be >= 0");
  if (spec.n0 < 0 || spec.n_bar < spec.n0)
    throw ContractViolation("lockin: need 0 <= n0 <= n_bar");
  if (spec.n_bar > cfg.max_iters)
    throw ContractViolation("lockin: n_bar must not exceed max_iters");

  const BlockDims dims = g.dims();
  const int d = dims.total();
  std::vector<double> sups(spec.replicas, std::numeric_limits<double>::infinity());

  parallel_for(spec.replicas, [&](int r) {
    // Start uniformly in the q0-ball around the target (at the target when q0 = 0).
    JointPoint x = spec.target;
    if (spec.q0 > 0) {
      auto init_rng = make_rng(cfg.seed, seed_task::kLockinInit, static_cast<std::uint64_t>(r));
      std::normal_distribution<double> gauss;
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      VectorXd dir(d);
      for (int i = 0; i < d; ++i) dir[i] = gauss(init_rng);
      double nrm = dir.norm();
      if (nrm == 0) nrm = 1;
      double radius = spec.q0 * std::pow(unif(init_rng), 1.0 / d);
      VectorXd offset = (radius / nrm) * dir;
      x = JointPoint::from_flat(dims, spec.target.flat() + offset);
    }

    NoiseStream noise{make_rng(cfg.seed, seed_task::kNoise, static_cast<std::uint64_t>(r)),
                      {}, &cfg.noise, dims};
    StepAux aux;
    double sup = 0.0;
    for (long n = 0;; ++n) {
      if (n >= spec.n_bar) sup = std::max(sup, (x - spec.target).norm());
      if (n == cfg.max_iters) {
        sups[r] = sup;
        return;
      }
      try {
        aux.field.reset();
        JointPoint next = step(cfg.rule, g, x, n + 1, cfg.schedules, noise.draw(), &aux);
        if (!next.all_finite()) return;  // leaves +inf: replica failed
        x = std::move(next);
      } catch (const std::exception&) {
        return;
      }
    }
  });
  return sups;
}

LockInEstimate wilson_interval(int successes, int replicas) {
  if (replicas < 1) throw ContractViolation("wilson_interval: replicas must be >= 1");
  const double z = 1.959963984540054;  // 95%
  const double n = replicas;
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2 * n)) / denom;
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / denom;
  LockInEstimate est;
  est.p_hat = p;
  est.ci_low = std::max(0.0, center - half);
  est.ci_high = std::min(1.0, center + half);
  est.successes = successes;
  est.replicas = replicas;
  return est;
}

LockInEstimate monte_carlo_lockin(const RunConfig& cfg, const GameOracle& g,
                                  const LockInSpec& spec) {
  std::vector<double> sups = lockin_sup_distances(cfg, g, spec);
  int usable = 0, successes = 0;
  for (double s : sups) {
    if (std::isfinite(s)) ++usable;
    if (s <= spec.epsilon) ++successes;
  }
  if (usable == 0)
    throw ConditioningFailure("lockin: every replica failed before the containment window");
  return wilson_interval(successes, spec.replicas);
}

}  // namespace stackdyn
