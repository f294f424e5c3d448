#include <doctest.h>

#include <cmath>

#include "stackdyn/dynamics.hpp"
#include "stackdyn/games.hpp"

using namespace stackdyn;

namespace {

JointPoint scalar_point(double a, double b) {
  return {VectorXd::Constant(1, a), VectorXd::Constant(1, b)};
}

RunConfig base_config(JointPoint x0) {
  RunConfig c;
  c.x0 = std::move(x0);
  c.schedules = {Schedule::constant(0.1), Schedule::constant(0.1)};
  c.max_iters = 100;
  c.stop_grad_tol = 0;  // run full length unless a test sets a tolerance
  return c;
}

}  // namespace

TEST_CASE("schedule values") {
  CHECK(Schedule::constant(0.3).value(17) == doctest::Approx(0.3));
  CHECK(Schedule::polynomial(1.0, 1.0).value(4) == doctest::Approx(0.25));
  CHECK(Schedule::polynomial(1.0, 2.0 / 3).value(8) == doctest::Approx(0.25));
  CHECK(Schedule::exponential(0.015, 1 - 1e-5).value(2) ==
        doctest::Approx(0.015 * (1 - 1e-5) * (1 - 1e-5)));
  CHECK_THROWS_AS(Schedule::polynomial(1.0, 1.0).value(0), ContractViolation);
}

TEST_CASE("timescale separation is decided symbolically") {
  auto p1 = Schedule::polynomial(1.0, 1.0);
  auto p23 = Schedule::polynomial(1.0, 2.0 / 3);
  CHECK(timescale_separated(p1, p23));
  CHECK_FALSE(timescale_separated(p23, p1));
  CHECK_FALSE(timescale_separated(p1, p1));
  CHECK_FALSE(timescale_separated(Schedule::constant(0.1), Schedule::constant(0.2)));
  // Exponential decays faster than any polynomial.
  auto e = Schedule::exponential(0.015, 1 - 1e-5);
  CHECK(timescale_separated(e, p1));
  CHECK_FALSE(timescale_separated(p1, e));
  // Within exponentials the smaller base decays faster.
  auto e2 = Schedule::exponential(0.015, 1 - 1e-7);
  CHECK(timescale_separated(e, e2));
  CHECK_FALSE(timescale_separated(e2, e));
}

TEST_CASE("one simgrad step of the scalar quadratic") {
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint x = step(SimGradRule{}, *g, scalar_point(1, 1), 1,
                      {Schedule::constant(0.1), Schedule::constant(0.1)},
                      JointPoint::Zero({1, 1}));
  CHECK(x.x1(0) == doctest::Approx(0.7));
  CHECK(x.x2(0) == doctest::Approx(1.1));
}

TEST_CASE("one stackelberg step of the scalar quadratic") {
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint x = step(StackelbergRule{}, *g, scalar_point(1, 1), 1,
                      {Schedule::constant(0.1), Schedule::constant(0.1)},
                      JointPoint::Zero({1, 1}));
  CHECK(x.x1(0) == doctest::Approx(0.5));   // 1 - 0.1 * 5
  CHECK(x.x2(0) == doctest::Approx(1.1));
}

TEST_CASE("one lola step shapes the leader update by the follower's learning rate") {
  // Leader term: D1 f1 - gamma_2 (D21 f2)^T D2 f1 = 3 - 0.1 * (-2)(1) = 3.2.
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint x = step(LolaRule{}, *g, scalar_point(1, 1), 1,
                      {Schedule::constant(0.1), Schedule::constant(0.1)},
                      JointPoint::Zero({1, 1}));
  CHECK(x.x1(0) == doctest::Approx(0.68));
  CHECK(x.x2(0) == doctest::Approx(1.1));
}

TEST_CASE("noise draw enters the update scaled by the learning rate") {
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint w{VectorXd::Constant(1, 1.0), VectorXd::Constant(1, -1.0)};
  JointPoint x = step(SimGradRule{}, *g, scalar_point(1, 1), 1,
                      {Schedule::constant(0.1), Schedule::constant(0.1)}, w);
  CHECK(x.x1(0) == doctest::Approx(0.6));   // 1 - 0.1 (3 + 1)
  CHECK(x.x2(0) == doctest::Approx(1.2));   // 1 - 0.1 (-1 - 1)
}

TEST_CASE("record cadence: row count is floor(iters/every) + 1") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.rule = SimGradRule{};
  c.max_iters = 10;
  c.record_every = 3;
  Trajectory t = run(c, *g);
  REQUIRE(t.records.size() == 4);  // k = 0, 3, 6, 9
  CHECK(t.records[0].k == 0);
  CHECK(t.records[3].k == 9);
  CHECK(t.reason == StopReason::max_iters);
  CHECK(t.terminal_k == 10);

  c.max_iters = 100;
  c.record_every = 10;
  t = run(c, *g);
  CHECK(t.records.size() == 11);
  CHECK(t.records.back().k == 100);
}

TEST_CASE("tolerance stop appends the terminal row and reports convergence") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.rule = SimGradRule{};
  c.max_iters = 10000;
  c.record_every = 1000;
  c.stop_grad_tol = 1e-6;
  Trajectory t = run(c, *g);
  CHECK(t.reason == StopReason::converged);
  CHECK(t.terminal_grad_norm < 1e-6);
  CHECK(t.records.back().k == t.terminal_k);
  CHECK(t.terminal_k % c.record_every != 0);  // appended off-cadence
  // The origin is the unique critical point.
  CHECK(t.terminal.norm() < 1e-5);
}

TEST_CASE("noise disables tolerance stopping") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(0, 0));  // already at the equilibrium
  c.rule = SimGradRule{};
  c.max_iters = 50;
  c.stop_grad_tol = 1e-3;
  c.noise.kind = NoiseModel::Kind::gaussian;
  c.noise.sigma = {0.1, 0.1};
  Trajectory t = run(c, *g);
  CHECK(t.reason == StopReason::max_iters);
  CHECK(t.terminal_k == 50);
}

TEST_CASE("equal seeds replay bit-identically, different noise seeds do not") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.rule = SimGradRule{};
  c.noise.kind = NoiseModel::Kind::gaussian;
  c.noise.sigma = {0.3, 0.3};
  c.seed = 99;
  Trajectory a = run(c, *g);
  Trajectory b = run(c, *g);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].x.x1(0) == b.records[i].x.x1(0));
    CHECK(a.records[i].x.x2(0) == b.records[i].x.x2(0));
  }
  c.noise.seed = 1;
  Trajectory d = run(c, *g);
  CHECK(a.terminal.x1(0) != d.terminal.x1(0));
}

TEST_CASE("unseparated schedules with noise warn under the stackelberg rule") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.rule = StackelbergRule{};
  c.noise.kind = NoiseModel::Kind::gaussian;
  c.noise.sigma = {0.1, 0.1};
  c.max_iters = 5;
  Trajectory t = run(c, *g);
  REQUIRE(!t.warnings.empty());
  CHECK(t.warnings.front().find("two-timescale") != std::string::npos);

  // Properly separated schedules stay quiet.
  c.schedules = {Schedule::polynomial(1.0, 1.0), Schedule::polynomial(1.0, 2.0 / 3)};
  Trajectory t2 = run(c, *g);
  CHECK(t2.warnings.empty());
}

TEST_CASE("diverging iterates end in numerical_failure, not a crash") {
  // f = -0.5 x1^2 repels the leader; a unit learning rate doubles x1 forever.
  auto g = scalar_zero_sum(-1, 0, 1);
  RunConfig c = base_config(scalar_point(1, 0));
  c.rule = SimGradRule{};
  c.schedules = {Schedule::constant(1.0), Schedule::constant(1.0)};
  c.max_iters = 5000;
  Trajectory t = run(c, *g);
  CHECK(t.reason == StopReason::numerical_failure);
  CHECK(!t.warnings.empty());
  CHECK(t.terminal.all_finite());
}

TEST_CASE("two-timescale stackelberg run reaches the duopoly Stackelberg point") {
  DuopolyGame d;
  auto g = d.oracle();
  RunConfig c = base_config(scalar_point(30, 30));
  c.rule = StackelbergRule{};
  c.schedules = {Schedule::polynomial(1.0, 1.0), Schedule::polynomial(1.0, 2.0 / 3)};
  c.max_iters = 3000;
  c.record_every = 500;
  Trajectory t = run(c, *g);
  CHECK(std::abs(t.terminal.x1(0) - 46.0) < 0.5);
  CHECK(std::abs(t.terminal.x2(0) - 26.0) < 0.5);
}

TEST_CASE("best-response run keeps the follower on its reaction curve") {
  DuopolyGame d;
  auto g = d.oracle();
  RunConfig c = base_config(scalar_point(40, 20));
  c.rule = BestResponseRule{};
  c.schedules = {Schedule::constant(0.5), Schedule::constant(0.5)};
  c.max_iters = 200;
  c.record_every = 20;
  Trajectory t = run_best_response(c, *g);
  for (auto& rec : t.records) {
    const double react = (d.A - rec.x.x1(0) - d.c2) / 2;
    CHECK(std::abs(rec.x.x2(0) - react) < 1e-6);
  }
  CHECK(std::abs(t.terminal.x1(0) - 46.0) < 1e-3);
  CHECK(std::abs(t.terminal.x2(0) - 26.0) < 1e-3);
}

TEST_CASE("a starved inner solve raises FollowerNonconvergence") {
  DuopolyGame d;
  auto g = d.oracle();
  RunConfig c = base_config(scalar_point(40, 5));
  BestResponseRule br;
  br.inner_max_iters = 2;
  c.rule = br;
  CHECK_THROWS_AS(run_best_response(c, *g), FollowerNonconvergence);
}

TEST_CASE("run_best_response rejects other rules") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.rule = SimGradRule{};
  CHECK_THROWS_AS(run_best_response(c, *g), ContractViolation);
}

TEST_CASE("config validation names the violated field") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(1, 1));
  c.record_every = 0;
  CHECK_THROWS_AS(run(c, *g), ContractViolation);
  c = base_config({VectorXd::Zero(2), VectorXd::Zero(1)});
  CHECK_THROWS_AS(run(c, *g), ContractViolation);
}

TEST_CASE("rule field selection") {
  CHECK_FALSE(rule_uses_stackelberg_field(SimGradRule{}));
  CHECK_FALSE(rule_uses_stackelberg_field(LolaRule{}));
  CHECK(rule_uses_stackelberg_field(StackelbergRule{}));
  CHECK(rule_uses_stackelberg_field(BestResponseRule{}));
}

TEST_CASE("wilson intervals: closed forms at the boundary") {
  const double z = 1.959963984540054;
  const double z2 = z * z;
  auto zero = wilson_interval(0, 10);
  CHECK(zero.p_hat == 0.0);
  CHECK(zero.ci_low == doctest::Approx(0.0));
  CHECK(zero.ci_high == doctest::Approx(z2 / (10 + z2)));
  auto full = wilson_interval(10, 10);
  CHECK(full.p_hat == 1.0);
  CHECK(full.ci_high == doctest::Approx(1.0));
  CHECK(full.ci_low == doctest::Approx(1.0 - z2 / (10 + z2)));
  auto half = wilson_interval(50, 100);
  CHECK(half.ci_low < 0.5);
  CHECK(half.ci_high > 0.5);
  CHECK(half.ci_low + half.ci_high ==
        doctest::Approx(2 * (0.5 + z2 / 200) / (1 + z2 / 100)));
  CHECK_THROWS_AS(wilson_interval(1, 0), ContractViolation);
}

TEST_CASE("lock-in replicas start at the target when q0 is zero") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(0, 0));
  c.rule = SimGradRule{};
  c.schedules = {Schedule::constant(0.05), Schedule::constant(0.05)};
  c.max_iters = 0;  // no steps: sup distance is exactly zero
  LockInSpec spec;
  spec.target = scalar_point(0, 0);
  spec.q0 = 0.0;
  spec.replicas = 8;
  auto sups = lockin_sup_distances(c, *g, spec);
  REQUIRE(sups.size() == 8);
  for (double s : sups) CHECK(s == 0.0);
}

TEST_CASE("lock-in estimates are monotone in epsilon by construction") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(0, 0));
  c.rule = SimGradRule{};
  c.schedules = {Schedule::constant(0.05), Schedule::constant(0.05)};
  c.noise.kind = NoiseModel::Kind::gaussian;
  c.noise.sigma = {0.1, 0.1};
  c.max_iters = 400;
  LockInSpec spec;
  spec.target = scalar_point(0, 0);
  spec.q0 = 0.05;
  spec.n_bar = 100;
  spec.replicas = 60;

  spec.epsilon = 0.05;
  auto tight = monte_carlo_lockin(c, *g, spec);
  spec.epsilon = 0.5;
  auto loose = monte_carlo_lockin(c, *g, spec);
  CHECK(tight.p_hat <= loose.p_hat);
  CHECK(loose.p_hat > 0.5);  // contractive dynamics with small noise lock in
  CHECK(tight.replicas == 60);
  CHECK(loose.ci_high <= 1.0);
  CHECK(loose.ci_low >= 0.0);
}

TEST_CASE("identical lock-in configs reproduce identical estimates") {
  auto g = scalar_zero_sum(1, 2, 1);
  RunConfig c = base_config(scalar_point(0, 0));
  c.rule = SimGradRule{};
  c.noise.kind = NoiseModel::Kind::gaussian;
  c.noise.sigma = {0.1, 0.1};
  c.max_iters = 200;
  c.seed = 31;
  LockInSpec spec;
  spec.target = scalar_point(0, 0);
  spec.q0 = 0.1;
  spec.replicas = 40;
  spec.epsilon = 0.2;
  auto a = monte_carlo_lockin(c, *g, spec);
  auto b = monte_carlo_lockin(c, *g, spec);
  CHECK(a.successes == b.successes);
  CHECK(a.p_hat == b.p_hat);
}
