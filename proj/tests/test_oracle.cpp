#include <doctest.h>

#include "stackdyn/games.hpp"
#include "stackdyn/oracle.hpp"

using namespace stackdyn;

namespace {

JointPoint scalar_point(double a, double b) {
  return {VectorXd::Constant(1, a), VectorXd::Constant(1, b)};
}

}  // namespace

TEST_CASE("simultaneous field of the scalar quadratic at (1,1)") {
  // f = 0.5 x1^2 + 2 x1 x2 - 0.5 x2^2, costs (f, -f):
  // D1 f1 = x1 + 2 x2 = 3, D2 f2 = -(2 x1 - x2) = -1.
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint w = omega(*g, scalar_point(1, 1));
  CHECK(w.x1(0) == doctest::Approx(3.0));
  CHECK(w.x2(0) == doctest::Approx(-1.0));
}

TEST_CASE("stackelberg field of the scalar quadratic at (1,1)") {
  // Leader block: D1 f - (D21 f2)^T (D2^2 f2)^{-1} D2 f1
  //             = 3 - (-2)(1)(1) = 5; follower block unchanged at -1.
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint w = omega_stackelberg(*g, scalar_point(1, 1), 0.0, SolveConfig::exact(1));
  CHECK(w.x1(0) == doctest::Approx(5.0));
  CHECK(w.x2(0) == doctest::Approx(-1.0));
}

TEST_CASE("stackelberg field detail exposes the follower solve for warm starts") {
  auto g = scalar_zero_sum(1, 2, 1);
  auto detail = omega_stackelberg_detail(*g, scalar_point(1, 1), 0.0, SolveConfig::exact(1));
  // (D2^2 f2) w = D2 f1 with D2^2 f2 = 1, D2 f1 = 1.
  CHECK(detail.follower_solve(0) == doctest::Approx(1.0));
  CHECK(detail.solve_residual < 1e-12);
  CHECK(detail.value.x1(0) == doctest::Approx(5.0));
}

TEST_CASE("eta regularizes the follower solve") {
  // With eta = 1 the inner solve uses (c + eta) = 2: block1 = 3 + 2*(1/2) = 4.
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint w = omega_stackelberg(*g, scalar_point(1, 1), 1.0, SolveConfig::exact(1));
  CHECK(w.x1(0) == doctest::Approx(4.0));
}

TEST_CASE("singular follower curvature at eta 0 raises SingularOperatorError") {
  // c = 0 makes D2^2 f2 identically zero.
  auto g = scalar_zero_sum(1, 2, 0);
  CHECK_THROWS_AS(omega_stackelberg(*g, scalar_point(1, 1), 0.0, SolveConfig::exact(1)),
                  SingularOperatorError);
  // A positive shift restores solvability.
  JointPoint w = omega_stackelberg(*g, scalar_point(1, 1), 0.5, SolveConfig::exact(1));
  CHECK(w.x1(0) == doctest::Approx(3.0 - (-2.0) * (1.0 / 0.5) * 2.0));
}

TEST_CASE("duopoly fields at the Stackelberg point") {
  DuopolyGame d;
  auto g = d.oracle();
  JointPoint q = scalar_point(46, 26);
  JointPoint w = omega(*g, q);
  CHECK(w.x1(0) == doctest::Approx(23.0));
  CHECK(w.x2(0) == doctest::Approx(0.0).epsilon(1e-12));
  JointPoint ws = omega_stackelberg(*g, q, 0.0, SolveConfig::exact(1));
  CHECK(ws.x1(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ws.x2(0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("duopoly simultaneous field vanishes only at the Nash point") {
  DuopolyGame d;
  auto g = d.oracle();
  auto eq = duopoly_equilibria(d);
  JointPoint w = omega(*g, eq.nash);
  CHECK(w.norm() < 1e-10);
  CHECK(eq.nash.x1(0) == doctest::Approx(92.0 / 3));
  CHECK(eq.nash.x2(0) == doctest::Approx(101.0 / 3));
}

TEST_CASE("gradient FD check passes for analytic oracles") {
  auto g = scalar_zero_sum(1, 2, 1);
  auto rep = fd_grad_check(*g, scalar_point(0.3, -0.7));
  CHECK(rep.pass);
  CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("sovp FD check passes for analytic oracles") {
  DuopolyGame d;
  auto g = d.oracle();
  auto rep = fd_sovp_check(*g, scalar_point(20, 30));
  CHECK(rep.pass);
}

TEST_CASE("FD oracle built from costs alone matches analytic gradients") {
  DuopolyGame d;
  auto analytic = d.oracle();
  auto fd = fd_oracle_from_costs(
      analytic->dims(), [&](const JointPoint& x) { return analytic->cost(1, x); },
      [&](const JointPoint& x) { return analytic->cost(2, x); });
  CHECK(fd->derivatives_approximate());
  JointPoint x = scalar_point(10, 12);
  for (int p : {1, 2})
    for (int b : {1, 2})
      CHECK((fd->grad(p, b, x) - analytic->grad(p, b, x)).norm() < 1e-4);
  // Second-order products through nested differences stay classifiable.
  VectorXd v = VectorXd::Constant(1, 1.0);
  CHECK((fd->sovp(1, 1, 1, x, v) - analytic->sovp(1, 1, 1, x, v)).norm() < 1e-3);
}

TEST_CASE("oracle rejects bad player and block indices") {
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint x = scalar_point(0, 0);
  CHECK_THROWS_AS(g->cost(3, x), ContractViolation);
  CHECK_THROWS_AS(g->grad(1, 0, x), ContractViolation);
  CHECK_THROWS_AS(g->sovp(1, 3, 1, x, VectorXd::Constant(1, 1.0)), ContractViolation);
}

TEST_CASE("dimension mismatches are contract violations") {
  auto g = scalar_zero_sum(1, 2, 1);
  JointPoint bad{VectorXd::Zero(2), VectorXd::Zero(1)};
  CHECK_THROWS_AS(omega(*g, bad), ContractViolation);
}
