#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "stackdyn/games.hpp"

using namespace stackdyn;

namespace {

JointPoint scalar_point(double a, double b) {
  return {VectorXd::Constant(1, a), VectorXd::Constant(1, b)};
}

constexpr double kPi = std::numbers::pi;

}  // namespace

TEST_CASE("duopoly closed forms: equilibria and profits") {
  DuopolyGame d;
  auto eq = duopoly_equilibria(d);
  CHECK(eq.nash.x1(0) == doctest::Approx(92.0 / 3));
  CHECK(eq.nash.x2(0) == doctest::Approx(101.0 / 3));
  CHECK(eq.stackelberg.x1(0) == doctest::Approx(46.0));
  CHECK(eq.stackelberg.x2(0) == doctest::Approx(26.0));
  CHECK(eq.nash_profit1 == doctest::Approx(8464.0 / 9));          // 940.44...
  CHECK(eq.stackelberg_profit1 == doctest::Approx(1058.0));
  CHECK(eq.stackelberg_profit1 > eq.nash_profit1);
  // Cost is negative profit.
  auto g = d.oracle();
  CHECK(g->cost(1, eq.stackelberg) == doctest::Approx(-1058.0));
}

TEST_CASE("duopoly priced-branch predicate") {
  DuopolyGame d;
  CHECK(d.in_priced_branch(scalar_point(40, 50)));
  CHECK_FALSE(d.in_priced_branch(scalar_point(60, 50)));
}

TEST_CASE("torus costs and gradients match the closed form") {
  TorusGame t;
  auto g = t.oracle();
  JointPoint x = scalar_point(0.3, -1.1);
  const double f1 = -1.0 * std::cos(0.3 - kPi / 8) + std::cos(0.3 - (-1.1));
  const double f2 = -1.3 * std::cos(-1.1 - kPi / 8) + std::cos(-1.1 - 0.3);
  CHECK(g->cost(1, x) == doctest::Approx(f1));
  CHECK(g->cost(2, x) == doctest::Approx(f2));
  CHECK(g->grad(1, 1, x)(0) ==
        doctest::Approx(1.0 * std::sin(0.3 - kPi / 8) - std::sin(0.3 + 1.1)));
  CHECK(g->grad(2, 2, x)(0) ==
        doctest::Approx(1.3 * std::sin(-1.1 - kPi / 8) - std::sin(-1.1 - 0.3)));
  CHECK(fd_grad_check(*g, x).pass);
  CHECK(fd_sovp_check(*g, x).pass);
}

TEST_CASE("torus fields are 2-pi periodic and canonical wraps into (-pi, pi]") {
  TorusGame t;
  auto g = t.oracle();
  JointPoint x = scalar_point(0.4, 2.9);
  JointPoint shifted = scalar_point(0.4 + 2 * kPi, 2.9 - 4 * kPi);
  CHECK((omega(*g, x) - omega(*g, shifted)).norm() < 1e-12);

  JointPoint c = g->canonical(scalar_point(3 * kPi / 2, -kPi));
  CHECK(c.x1(0) == doctest::Approx(-kPi / 2));
  CHECK(c.x2(0) == doctest::Approx(kPi));
  CHECK(c.x2(0) > -kPi);
}

TEST_CASE("enveloped quartic game matches the closed form and is zero-sum") {
  auto g = poly_zero_sum(0.15, 0.25);
  CHECK(g->zero_sum());
  CHECK(g->derivatives_approximate());  // curvature products are differenced
  JointPoint x = scalar_point(1.2, -0.5);
  const double u = 0.15 * 1.2 * 1.2 + (-0.5);
  const double v = 0.25 * 0.25 + 1.2;  // b x2^2 + x1
  const double env = std::exp(-0.01 * (1.2 * 1.2 + 0.25));
  const double f = -env * (u * u + v * v);
  CHECK(g->cost(1, x) == doctest::Approx(f));
  CHECK(g->cost(2, x) == doctest::Approx(-f));
  CHECK(fd_grad_check(*g, x).pass);
  // Origin is a critical point of the simultaneous field.
  CHECK(omega(*g, scalar_point(0, 0)).norm() < 1e-12);
}

TEST_CASE("covariance GAN costs, gradients, and metrics") {
  MatrixXd sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 1.5;
  auto gan = CovarianceGan{sigma, 0.4};
  auto g = gan.oracle();
  CHECK_FALSE(g->zero_sum());  // regularized follower breaks the zero sum
  CHECK(covariance_gan(sigma, 0.0)->zero_sum());

  // V = I, W = [[1, 0], [1, 2]]: f = <W, Sigma - I>.
  MatrixXd v0 = MatrixXd::Identity(2, 2);
  MatrixXd w0(2, 2);
  w0 << 1, 0, 1, 2;
  JointPoint x{Eigen::Map<VectorXd>(v0.data(), 4), Eigen::Map<VectorXd>(w0.data(), 4)};
  const double want_f1 = (w0.array() * (sigma - v0 * v0.transpose()).array()).sum();
  CHECK(g->cost(1, x) == doctest::Approx(want_f1));
  CHECK(g->cost(2, x) == doctest::Approx(-want_f1 + 0.2 * w0.squaredNorm()));
  CHECK(fd_grad_check(*g, x).pass);
  CHECK(fd_sovp_check(*g, x).pass);

  // At V* V*^T = Sigma and W = 0 the simultaneous field vanishes and the
  // metrics are exactly zero.
  MatrixXd vstar = sigma.llt().matrixL();
  JointPoint eq{Eigen::Map<VectorXd>(vstar.data(), 4), VectorXd::Zero(4)};
  CHECK(omega(*g, eq).norm() < 1e-12);
  GanMetrics m = covariance_gan_metrics(gan, eq);
  CHECK(m.sigma_err < 1e-12);
  CHECK(m.w_sym_norm < 1e-12);
  GanMetrics m0 = covariance_gan_metrics(gan, x);
  CHECK(m0.sigma_err ==
        doctest::Approx(eig_dense(MatrixXd(sigma - MatrixXd::Identity(2, 2))).max_abs()));
  CHECK(m0.w_sym_norm == doctest::Approx(eig_dense(MatrixXd((w0 + w0.transpose()) / 2)).max_abs()));
}

TEST_CASE("covariance GAN rejects a non-SPD target") {
  MatrixXd bad(2, 2);
  bad << 1, 2, 2, 1;  // indefinite
  CHECK_THROWS_AS(covariance_gan(bad, 0.0), ContractViolation);
}

TEST_CASE("shared eigenbasis game realizes the prescribed blocks") {
  MatrixXd w1 = MatrixXd::Identity(2, 2);
  // Rotate the follower basis by 30 degrees.
  const double th = kPi / 6;
  MatrixXd w2(2, 2);
  w2 << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  VectorXd m(2), l(2);
  m << -1, 2;
  l << 3, 1;
  MatrixXd sig(2, 2);
  sig << 2, 0, 0, 1;
  auto g = shared_eigenbasis_game(w1, m, w2, l, sig);
  CHECK(g->zero_sum());
  JointPoint x{VectorXd::Zero(2), VectorXd::Zero(2)};

  MatrixXd h1(2, 2), h2(2, 2), c12(2, 2);
  for (int j = 0; j < 2; ++j) {
    h1.col(j) = g->sovp(1, 1, 1, x, VectorXd::Unit(2, j));
    h2.col(j) = g->sovp(2, 2, 2, x, VectorXd::Unit(2, j));
    c12.col(j) = g->sovp(1, 1, 2, x, VectorXd::Unit(2, j));
  }
  CHECK((h1 - w1 * m.asDiagonal() * w1.transpose()).norm() < 1e-12);
  // D2^2 f2 = -D2^2 f = W2 L W2^T.
  CHECK((h2 - w2 * l.asDiagonal() * w2.transpose()).norm() < 1e-12);
  CHECK((c12 - w1 * sig * w2.transpose()).norm() < 1e-12);
}

TEST_CASE("random quadratic games are deterministic in the draw parameters") {
  QuadraticGameSpec spec;
  spec.dims = {2, 3};
  spec.seed = 42;
  auto a = random_quadratic(spec);
  auto b = random_quadratic(spec);
  JointPoint x{VectorXd::Ones(2), VectorXd::Ones(3)};
  CHECK(a->cost(1, x) == b->cost(1, x));
  CHECK((a->grad(2, 2, x) - b->grad(2, 2, x)).norm() == 0.0);
  spec.seed = 43;
  auto c = random_quadratic(spec);
  CHECK(a->cost(1, x) != c->cost(1, x));
}

TEST_CASE("zero-sum random quadratics really are zero-sum") {
  QuadraticGameSpec spec;
  spec.dims = {3, 2};
  spec.seed = 7;
  auto g = random_quadratic(spec);
  CHECK(g->zero_sum());
  JointPoint x{VectorXd::Ones(3) * 0.3, VectorXd::Ones(2) * -1.2};
  CHECK(g->cost(1, x) == doctest::Approx(-g->cost(2, x)));
  CHECK(fd_grad_check(*g, x).pass);
}

TEST_CASE("quadratic_game validates symmetry and shapes") {
  QuadraticBlocks b;
  b.f1.self1 = MatrixXd::Identity(2, 2);
  b.f1.self2 = MatrixXd::Identity(3, 3);
  b.f1.coupling = MatrixXd::Zero(2, 3);
  b.f1.lin1 = VectorXd::Zero(2);
  b.f1.lin2 = VectorXd::Zero(3);
  b.f2 = b.f1;
  CHECK_NOTHROW(quadratic_game(b));

  QuadraticBlocks bad = b;
  bad.f2.self2(0, 1) = 5;  // asymmetric
  CHECK_THROWS_AS(quadratic_game(bad), ContractViolation);

  QuadraticBlocks bad2 = b;
  bad2.f2.coupling = MatrixXd::Zero(3, 2);  // transposed shape
  CHECK_THROWS_AS(quadratic_game(bad2), ContractViolation);
}

TEST_CASE("parse_game handles every kind and names missing fields") {
  auto duo = parse_game(R"({"game":"duopoly","A":100,"c1":5,"c2":2})");
  CHECK(duo.kind == "duopoly");
  REQUIRE(duo.duopoly.has_value());
  CHECK(duo.duopoly->A == 100.0);

  CHECK_THROWS_WITH_AS(parse_game(R"({"game":"duopoly","A":100,"c2":2})"),
                       doctest::Contains("c1"), ContractViolation);
  CHECK_THROWS_AS(parse_game(R"({"game":"nope"})"), ContractViolation);
  CHECK_THROWS_AS(parse_game("not json"), ContractViolation);

  auto tor = parse_game(R"({"game":"torus","alpha":[1.0,1.3]})");
  CHECK(tor.oracle->dims().total() == 2);

  auto pol = parse_game(R"({"game":"poly"})");
  CHECK(pol.oracle->zero_sum());

  auto sca = parse_game(R"({"game":"scalar","a":1,"b":2,"c":1})");
  CHECK(sca.oracle->zero_sum());

  auto cov = parse_game(R"({"game":"covariance","sigma":[[4.0]],"eta_follower":0.2})");
  REQUIRE(cov.covariance.has_value());
  CHECK(cov.covariance->m() == 1);

  auto qua = parse_game(R"({"game":"quadratic","dims":[2,2],"seed":5})");
  CHECK(qua.oracle->dims().total() == 4);
}
