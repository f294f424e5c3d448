#include "stackdyn/games.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include <json.hpp>

#include "stackdyn/rng.hpp"

namespace stackdyn {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// ---------------------------------------------------------------------------
// Duopoly

class DuopolyOracle final : public GameOracle {
 public:
  explicit DuopolyOracle(DuopolyGame g) : g_(g) {}

  BlockDims dims() const override { return {1, 1}; }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims(), "duopoly cost");
    double q1 = x.x1[0], q2 = x.x2[0];
    double p = g_.A - q1 - q2;
    double q = player == 1 ? q1 : q2;
    double c = player == 1 ? g_.c1 : g_.c2;
    return -(p - c) * q;
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims(), "duopoly grad");
    double q1 = x.x1[0], q2 = x.x2[0];
    VectorXd out(1);
    if (player == 1) {
      out[0] = block == 1 ? -(g_.A - 2 * q1 - q2 - g_.c1) : q1;
    } else {
      out[0] = block == 1 ? q2 : -(g_.A - q1 - 2 * q2 - g_.c2);
    }
    return out;
  }

  VectorXd sovp(int player, int gb, int wb, const JointPoint& x, const VectorXd& v) const override {
    check_player(player);
    check_block(gb);
    check_block(wb);
    require_dims(x, dims(), "duopoly sovp");
    if (v.size() != 1) throw ContractViolation("duopoly sovp: direction size mismatch");
    // Constant curvature: own block 2, cross blocks 1.
    double h = (gb == wb) ? (gb == (player == 1 ? 1 : 2) ? 2.0 : 0.0) : 1.0;
    return VectorXd::Constant(1, h * v[0]);
  }

 private:
  DuopolyGame g_;
};

// ---------------------------------------------------------------------------
// Torus location game

double wrap_angle(double t) {
  // into (-pi, pi]
  double w = std::remainder(t, kTwoPi);
  if (w <= -std::numbers::pi) w += kTwoPi;
  return w;
}

class TorusOracle final : public GameOracle {
 public:
  explicit TorusOracle(TorusGame g) : g_(g) {}

  BlockDims dims() const override { return {1, 1}; }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims(), "torus cost");
    double own = player == 1 ? x.x1[0] : x.x2[0];
    double other = player == 1 ? x.x2[0] : x.x1[0];
    int i = player - 1;
    return -g_.alpha[i] * std::cos(own - g_.phi[i]) + std::cos(own - other);
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims(), "torus grad");
    double own = player == 1 ? x.x1[0] : x.x2[0];
    double other = player == 1 ? x.x2[0] : x.x1[0];
    int i = player - 1;
    bool own_block = block == player;
    VectorXd out(1);
    out[0] = own_block ? g_.alpha[i] * std::sin(own - g_.phi[i]) - std::sin(own - other)
                       : std::sin(own - other);
    return out;
  }

  VectorXd sovp(int player, int gb, int wb, const JointPoint& x, const VectorXd& v) const override {
    check_player(player);
    check_block(gb);
    check_block(wb);
    require_dims(x, dims(), "torus sovp");
    if (v.size() != 1) throw ContractViolation("torus sovp: direction size mismatch");
    double own = player == 1 ? x.x1[0] : x.x2[0];
    double other = player == 1 ? x.x2[0] : x.x1[0];
    int i = player - 1;
    bool g_own = gb == player;
    bool w_own = wb == player;
    double h;
    if (g_own && w_own)
      h = g_.alpha[i] * std::cos(own - g_.phi[i]) - std::cos(own - other);
    else if (g_own != w_own)
      h = std::cos(own - other);
    else
      h = -std::cos(own - other);
    return VectorXd::Constant(1, h * v[0]);
  }

  JointPoint canonical(const JointPoint& x) const override {
    JointPoint y = x;
    y.x1[0] = wrap_angle(y.x1[0]);
    y.x2[0] = wrap_angle(y.x2[0]);
    return y;
  }

 private:
  TorusGame g_;
};

// ---------------------------------------------------------------------------
// Enveloped quartic zero-sum game

class PolyOracle final : public GameOracle {
 public:
  PolyOracle(double a, double b) : a_(a), b_(b) {}

  BlockDims dims() const override { return {1, 1}; }

  double f(double x1, double x2) const {
    double u = a_ * x1 * x1 + x2;
    double v = b_ * x2 * x2 + x1;
    return -std::exp(-0.01 * (x1 * x1 + x2 * x2)) * (u * u + v * v);
  }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims(), "poly cost");
    double val = f(x.x1[0], x.x2[0]);
    return player == 1 ? val : -val;
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims(), "poly grad");
    double x1 = x.x1[0], x2 = x.x2[0];
    double e = std::exp(-0.01 * (x1 * x1 + x2 * x2));
    double u = a_ * x1 * x1 + x2;
    double v = b_ * x2 * x2 + x1;
    double g = u * u + v * v;
    double df = block == 1 ? e * (0.02 * x1 * g - 4 * a_ * x1 * u - 2 * v)
                           : e * (0.02 * x2 * g - 2 * u - 4 * b_ * x2 * v);
    return VectorXd::Constant(1, player == 1 ? df : -df);
  }

  VectorXd sovp(int player, int gb, int wb, const JointPoint& x, const VectorXd& v) const override {
    check_player(player);
    check_block(gb);
    check_block(wb);
    require_dims(x, dims(), "poly sovp");
    if (v.size() != 1) throw ContractViolation("poly sovp: direction size mismatch");
    // Differenced analytic gradients; quartic-with-envelope third derivatives
    // are not part of the oracle surface.
    const double h = fd_scale(x, 1e-5);
    JointPoint xp = x, xm = x;
    xp.block(wb)[0] += h;
    xm.block(wb)[0] -= h;
    VectorXd diff = (grad(player, gb, xp) - grad(player, gb, xm)) / (2 * h);
    return diff * v[0];
  }

  bool derivatives_approximate() const override { return true; }
  bool zero_sum() const override { return true; }

 private:
  double a_, b_;
};

// ---------------------------------------------------------------------------
// Covariance-learning GAN

class CovarianceOracle final : public GameOracle {
 public:
  explicit CovarianceOracle(CovarianceGan g) : g_(std::move(g)), m_(g_.m()) {
    if (m_ < 1) throw ContractViolation("covariance gan: sigma must be at least 1x1");
    if (g_.sigma.rows() != g_.sigma.cols())
      throw ContractViolation("covariance gan: sigma must be square");
    if ((g_.sigma - g_.sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12)
      throw ContractViolation("covariance gan: sigma must be symmetric");
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g_.sigma);
    if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() <= 0)
      throw ContractViolation("covariance gan: sigma must be positive definite");
    if (g_.eta_follower < 0) throw ContractViolation("covariance gan: eta_follower must be >= 0");
  }

  BlockDims dims() const override { return {m_ * m_, m_ * m_}; }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims(), "covariance cost");
    MatrixXd v = mat(x.x1), w = mat(x.x2);
    double f = (w.array() * (g_.sigma - v * v.transpose()).array()).sum();
    if (player == 1) return f;
    return -f + 0.5 * g_.eta_follower * w.squaredNorm();
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims(), "covariance grad");
    MatrixXd v = mat(x.x1), w = mat(x.x2);
    if (player == 1 && block == 1) return vec(-(w + w.transpose()) * v);
    if (player == 1 && block == 2) return vec(g_.sigma - v * v.transpose());
    if (player == 2 && block == 1) return vec((w + w.transpose()) * v);
    MatrixXd out = -(g_.sigma - v * v.transpose()) + g_.eta_follower * w;
    return vec(out);
  }

  VectorXd sovp(int player, int gb, int wb, const JointPoint& x, const VectorXd& dir) const override {
    check_player(player);
    check_block(gb);
    check_block(wb);
    require_dims(x, dims(), "covariance sovp");
    if (dir.size() != m_ * m_) throw ContractViolation("covariance sovp: direction size mismatch");
    MatrixXd v = mat(x.x1), w = mat(x.x2), d = mat(dir);
    double sgn = player == 1 ? 1.0 : -1.0;
    if (gb == 1 && wb == 1) return vec(sgn * -(w + w.transpose()) * d);
    if (gb == 1 && wb == 2) return vec(sgn * -(d + d.transpose()) * v);
    if (gb == 2 && wb == 1) return vec(sgn * -(d * v.transpose() + v * d.transpose()));
    MatrixXd out = player == 2 ? MatrixXd(g_.eta_follower * d) : MatrixXd::Zero(m_, m_);
    return vec(out);
  }

  bool zero_sum() const override { return g_.eta_follower == 0.0; }

 private:
  MatrixXd mat(const VectorXd& v) const {
    return Eigen::Map<const MatrixXd>(v.data(), m_, m_);
  }
  VectorXd vec(const MatrixXd& m) const {
    return Eigen::Map<const VectorXd>(m.data(), m.size());
  }

  CovarianceGan g_;
  int m_;
};

// ---------------------------------------------------------------------------
// Quadratic games

class QuadraticOracle final : public GameOracle {
 public:
  explicit QuadraticOracle(QuadraticBlocks b) : b_(std::move(b)) {
    const auto check = [](const QuadraticBlocks::PlayerCost& c, const char* who) {
      if (c.self1.rows() != c.self1.cols() || c.self2.rows() != c.self2.cols())
        throw ContractViolation(std::string("quadratic game: self blocks must be square (") + who + ")");
      if (c.coupling.rows() != c.self1.rows() || c.coupling.cols() != c.self2.rows())
        throw ContractViolation(std::string("quadratic game: coupling shape mismatch (") + who + ")");
      if (c.lin1.size() != c.self1.rows() || c.lin2.size() != c.self2.rows())
        throw ContractViolation(std::string("quadratic game: linear term shape mismatch (") + who + ")");
      double scale = std::max({1.0, c.self1.cwiseAbs().maxCoeff(), c.self2.cwiseAbs().maxCoeff()});
      if ((c.self1 - c.self1.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale ||
          (c.self2 - c.self2.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ContractViolation(std::string("quadratic game: self blocks must be symmetric (") + who + ")");
    };
    check(b_.f1, "f1");
    check(b_.f2, "f2");
    if (b_.f1.self1.rows() != b_.f2.self1.rows() || b_.f1.self2.rows() != b_.f2.self2.rows())
      throw ContractViolation("quadratic game: players disagree on dims");
  }

  BlockDims dims() const override {
    return {static_cast<int>(b_.f1.self1.rows()), static_cast<int>(b_.f1.self2.rows())};
  }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims(), "quadratic cost");
    const auto& c = player == 1 ? b_.f1 : b_.f2;
    return 0.5 * x.x1.dot(c.self1 * x.x1) + x.x1.dot(c.coupling * x.x2) +
           0.5 * x.x2.dot(c.self2 * x.x2) + c.lin1.dot(x.x1) + c.lin2.dot(x.x2);
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims(), "quadratic grad");
    const auto& c = player == 1 ? b_.f1 : b_.f2;
    if (block == 1) return c.self1 * x.x1 + c.coupling * x.x2 + c.lin1;
    return c.coupling.transpose() * x.x1 + c.self2 * x.x2 + c.lin2;
  }

  VectorXd sovp(int player, int gb, int wb, const JointPoint& x, const VectorXd& v) const override {
    check_player(player);
    check_block(gb);
    check_block(wb);
    require_dims(x, dims(), "quadratic sovp");
    const auto& c = player == 1 ? b_.f1 : b_.f2;
    const int want = wb == 1 ? dims().d1 : dims().d2;
    if (v.size() != want) throw ContractViolation("quadratic sovp: direction size mismatch");
    if (gb == 1 && wb == 1) return c.self1 * v;
    if (gb == 1 && wb == 2) return c.coupling * v;
    if (gb == 2 && wb == 1) return c.coupling.transpose() * v;
    return c.self2 * v;
  }

  bool zero_sum() const override { return b_.zero_sum; }

 private:
  QuadraticBlocks b_;
};

MatrixXd random_symmetric(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> gauss;
  MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  return 0.5 * (m + m.transpose());
}

MatrixXd random_dense(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> gauss;
  MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gauss(rng);
  return m;
}

}  // namespace

std::shared_ptr<GameOracle> DuopolyGame::oracle() const {
  if (A <= 0) throw ContractViolation("duopoly: A must be positive");
  return std::make_shared<DuopolyOracle>(*this);
}

DuopolyEquilibria duopoly_equilibria(const DuopolyGame& g) {
  DuopolyEquilibria eq;
  double qn1 = (g.A + g.c2 - 2 * g.c1) / 3.0;
  double qn2 = (g.A + g.c1 - 2 * g.c2) / 3.0;
  eq.nash = {VectorXd::Constant(1, qn1), VectorXd::Constant(1, qn2)};
  double qs1 = (g.A + g.c2 - 2 * g.c1) / 2.0;
  double qs2 = (g.A - qs1 - g.c2) / 2.0;
  eq.stackelberg = {VectorXd::Constant(1, qs1), VectorXd::Constant(1, qs2)};
  auto profit = [&g](double q1, double q2, int player) {
    double p = g.A - q1 - q2;
    return player == 1 ? (p - g.c1) * q1 : (p - g.c2) * q2;
  };
  eq.nash_profit1 = profit(qn1, qn2, 1);
  eq.nash_profit2 = profit(qn1, qn2, 2);
  eq.stackelberg_profit1 = profit(qs1, qs2, 1);
  eq.stackelberg_profit2 = profit(qs1, qs2, 2);
  return eq;
}

std::shared_ptr<GameOracle> TorusGame::oracle() const {
  return std::make_shared<TorusOracle>(*this);
}

std::shared_ptr<GameOracle> torus_game(const TorusGame& g) { return g.oracle(); }

std::shared_ptr<GameOracle> PolyZeroSumGame::oracle() const {
  return std::make_shared<PolyOracle>(a, b);
}

std::shared_ptr<GameOracle> poly_zero_sum(double a, double b) {
  return std::make_shared<PolyOracle>(a, b);
}

std::shared_ptr<GameOracle> CovarianceGan::oracle() const {
  return std::make_shared<CovarianceOracle>(*this);
}

std::shared_ptr<GameOracle> covariance_gan(MatrixXd sigma, double eta_follower) {
  return CovarianceGan{std::move(sigma), eta_follower}.oracle();
}

GanMetrics covariance_gan_metrics(const CovarianceGan& g, const JointPoint& x) {
  const int m = g.m();
  MatrixXd v = Eigen::Map<const MatrixXd>(x.x1.data(), m, m);
  MatrixXd w = Eigen::Map<const MatrixXd>(x.x2.data(), m, m);
  MatrixXd gap = g.sigma - v * v.transpose();
  MatrixXd wsym = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> e1(gap), e2(wsym);
  return {e1.eigenvalues().cwiseAbs().maxCoeff(), e2.eigenvalues().cwiseAbs().maxCoeff()};
}

std::shared_ptr<GameOracle> quadratic_game(const QuadraticBlocks& blocks) {
  return std::make_shared<QuadraticOracle>(blocks);
}

std::shared_ptr<GameOracle> scalar_zero_sum(double a, double b, double c) {
  QuadraticBlocks blocks;
  blocks.f1.self1 = MatrixXd::Constant(1, 1, a);
  blocks.f1.coupling = MatrixXd::Constant(1, 1, b);
  blocks.f1.self2 = MatrixXd::Constant(1, 1, -c);
  blocks.f1.lin1 = VectorXd::Zero(1);
  blocks.f1.lin2 = VectorXd::Zero(1);
  blocks.f2.self1 = -blocks.f1.self1;
  blocks.f2.coupling = -blocks.f1.coupling;
  blocks.f2.self2 = -blocks.f1.self2;
  blocks.f2.lin1 = VectorXd::Zero(1);
  blocks.f2.lin2 = VectorXd::Zero(1);
  blocks.zero_sum = true;
  return quadratic_game(blocks);
}

std::shared_ptr<GameOracle> shared_eigenbasis_game(const MatrixXd& w1, const VectorXd& m_diag,
                                                   const MatrixXd& w2, const VectorXd& l_diag,
                                                   const MatrixXd& s) {
  const int d1 = static_cast<int>(w1.rows());
  const int d2 = static_cast<int>(w2.rows());
  if (w1.cols() != d1 || w2.cols() != d2)
    throw ContractViolation("shared_eigenbasis_game: eigenbases must be square");
  if (m_diag.size() != d1 || l_diag.size() != d2)
    throw ContractViolation("shared_eigenbasis_game: diagonal length mismatch");
  if (s.rows() != d1 || s.cols() != d2)
    throw ContractViolation("shared_eigenbasis_game: interaction shape mismatch");

  QuadraticBlocks blocks;
  blocks.f1.self1 = w1 * m_diag.asDiagonal() * w1.transpose();
  blocks.f1.coupling = w1 * s * w2.transpose();
  blocks.f1.self2 = -(w2 * l_diag.asDiagonal() * w2.transpose());
  blocks.f1.lin1 = VectorXd::Zero(d1);
  blocks.f1.lin2 = VectorXd::Zero(d2);
  blocks.f2.self1 = -blocks.f1.self1;
  blocks.f2.coupling = -blocks.f1.coupling;
  blocks.f2.self2 = -blocks.f1.self2;
  blocks.f2.lin1 = VectorXd::Zero(d1);
  blocks.f2.lin2 = VectorXd::Zero(d2);
  blocks.zero_sum = true;
  return quadratic_game(blocks);
}

std::shared_ptr<GameOracle> random_quadratic(const QuadraticGameSpec& spec) {
  spec.dims.require_valid();
  auto rng = make_rng(spec.seed, seed_task::kGameDraw);
  QuadraticBlocks blocks;
  blocks.f1.self1 = random_symmetric(rng, spec.dims.d1);
  blocks.f1.self2 = random_symmetric(rng, spec.dims.d2);
  blocks.f1.coupling = spec.coupling_scale * random_dense(rng, spec.dims.d1, spec.dims.d2);
  blocks.f1.lin1 = VectorXd::Zero(spec.dims.d1);
  blocks.f1.lin2 = VectorXd::Zero(spec.dims.d2);
  if (spec.cls == QuadraticGameSpec::Class::zero_sum) {
    blocks.f2.self1 = -blocks.f1.self1;
    blocks.f2.self2 = -blocks.f1.self2;
    blocks.f2.coupling = -blocks.f1.coupling;
    blocks.f2.lin1 = VectorXd::Zero(spec.dims.d1);
    blocks.f2.lin2 = VectorXd::Zero(spec.dims.d2);
    blocks.zero_sum = true;
  } else {
    blocks.f2.self1 = random_symmetric(rng, spec.dims.d1);
    blocks.f2.self2 = random_symmetric(rng, spec.dims.d2);
    blocks.f2.coupling = spec.coupling_scale * random_dense(rng, spec.dims.d1, spec.dims.d2);
    blocks.f2.lin1 = VectorXd::Zero(spec.dims.d1);
    blocks.f2.lin2 = VectorXd::Zero(spec.dims.d2);
  }
  return quadratic_game(blocks);
}

namespace {

using nlohmann::json;

const json& need(const json& j, const char* field) {
  if (!j.contains(field))
    throw ContractViolation(std::string("game spec: missing field '") + field + "'");
  return j.at(field);
}

MatrixXd parse_matrix(const json& j, const char* field) {
  if (!j.is_array() || j.empty() || !j[0].is_array())
    throw ContractViolation(std::string("game spec: '") + field + "' must be a matrix (array of rows)");
  const size_t rows = j.size(), cols = j[0].size();
  MatrixXd m(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols)
      throw ContractViolation(std::string("game spec: '") + field + "' rows have uneven length");
    for (size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

GameHandle parse_game(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ContractViolation(std::string("game spec: invalid JSON: ") + e.what());
  }
  const std::string kind = need(j, "game").get<std::string>();
  GameHandle h;
  h.kind = kind;
  if (kind == "duopoly") {
    DuopolyGame g;
    g.A = need(j, "A").get<double>();
    g.c1 = need(j, "c1").get<double>();
    g.c2 = need(j, "c2").get<double>();
    h.oracle = g.oracle();
    h.duopoly = g;
  } else if (kind == "torus") {
    TorusGame g;
    if (j.contains("alpha")) {
      auto a = j.at("alpha");
      if (!a.is_array() || a.size() != 2)
        throw ContractViolation("game spec: 'alpha' must have two entries");
      g.alpha = {a[0].get<double>(), a[1].get<double>()};
    }
    if (j.contains("phi")) {
      auto p = j.at("phi");
      if (!p.is_array() || p.size() != 2)
        throw ContractViolation("game spec: 'phi' must have two entries");
      g.phi = {p[0].get<double>(), p[1].get<double>()};
    }
    h.oracle = g.oracle();
  } else if (kind == "poly") {
    double a = j.value("a", 0.15);
    double b = j.value("b", 0.25);
    h.oracle = poly_zero_sum(a, b);
  } else if (kind == "covariance") {
    CovarianceGan g;
    g.sigma = parse_matrix(need(j, "sigma"), "sigma");
    g.eta_follower = j.value("eta_follower", 0.0);
    h.oracle = g.oracle();
    h.covariance = std::move(g);
  } else if (kind == "scalar") {
    h.oracle = scalar_zero_sum(need(j, "a").get<double>(), need(j, "b").get<double>(),
                               need(j, "c").get<double>());
  } else if (kind == "quadratic") {
    QuadraticGameSpec spec;
    if (j.contains("dims")) {
      auto d = j.at("dims");
      if (!d.is_array() || d.size() != 2)
        throw ContractViolation("game spec: 'dims' must be [d1, d2]");
      spec.dims = {d[0].get<int>(), d[1].get<int>()};
    }
    spec.seed = j.value("seed", 0ULL);
    spec.coupling_scale = j.value("coupling_scale", 1.0);
    std::string cls = j.value("class", std::string("zero_sum"));
    if (cls == "zero_sum")
      spec.cls = QuadraticGameSpec::Class::zero_sum;
    else if (cls == "general_sum")
      spec.cls = QuadraticGameSpec::Class::general_sum;
    else
      throw ContractViolation("game spec: 'class' must be zero_sum or general_sum");
    h.oracle = random_quadratic(spec);
  } else {
    throw ContractViolation("game spec: unknown game '" + kind + "'");
  }
  return h;
}

}  // namespace stackdyn
