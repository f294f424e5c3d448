#include "stackdyn/oracle.hpp"

#include <cmath>
#include <random>

#include "stackdyn/rng.hpp"

namespace stackdyn {

JointPoint omega(const GameOracle& g, const JointPoint& x) {
  require_dims(x, g.dims(), "omega");
  return {g.grad(1, 1, x), g.grad(2, 2, x)};
}

StackelbergField omega_stackelberg_detail(const GameOracle& g, const JointPoint& x, double eta,
                                          const SolveConfig& cfg) {
  require_dims(x, g.dims(), "omega_stackelberg");
  if (eta < 0) throw ContractViolation("omega_stackelberg: eta must be >= 0");

  const int d2 = g.dims().d2;
  LinearMap follower_curv{d2, d2,
                          [&g, &x, eta](const VectorXd& v) {
                            VectorXd out = g.sovp(2, 2, 2, x, v);
                            if (eta != 0.0) out += eta * v;
                            return out;
                          },
                          true};

  VectorXd rhs = g.grad(1, 2, x);  // D2 f1
  SolveResult sol;
  try {
    sol = cg_solve(follower_curv, rhs, cfg);
  } catch (const IndefiniteOperatorError& e) {
    if (eta == 0.0)
      throw SingularOperatorError(
          std::string("omega_stackelberg: follower curvature singular at requested point: ") +
              e.what(),
          rhs.norm());
    throw;
  }

  VectorXd correction = g.sovp(2, 1, 2, x, sol.x);  // (D21 f2)^T w, via the adjoint block
  StackelbergField out;
  out.value = {g.grad(1, 1, x) - correction, g.grad(2, 2, x)};
  out.follower_solve = std::move(sol.x);
  out.solve_residual = sol.residual;
  return out;
}

JointPoint omega_stackelberg(const GameOracle& g, const JointPoint& x, double eta,
                             const SolveConfig& cfg) {
  return omega_stackelberg_detail(g, x, eta, cfg).value;
}

namespace {

void fold_err(FdCheckReport& rep, const VectorXd& got, const VectorXd& want, const FdConfig& cfg) {
  for (int i = 0; i < got.size(); ++i) {
    double abs_err = std::abs(got[i] - want[i]);
    rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
    if (abs_err <= cfg.abs_tol) continue;
    double rel = abs_err / std::max(std::abs(got[i]), std::abs(want[i]));
    rep.max_rel_err = std::max(rep.max_rel_err, rel);
    if (rel > cfg.rel_tol) rep.pass = false;
  }
}

JointPoint nudged(const JointPoint& x, int block, int coord, double h) {
  JointPoint y = x;
  y.block(block)[coord] += h;
  return y;
}

}  // namespace

FdCheckReport fd_grad_check(const GameOracle& g, const JointPoint& x, const FdConfig& cfg) {
  require_dims(x, g.dims(), "fd_grad_check");
  const double h = fd_scale(x, cfg.step);
  FdCheckReport rep;
  for (int player = 1; player <= 2; ++player) {
    for (int block = 1; block <= 2; ++block) {
      VectorXd analytic = g.grad(player, block, x);
      VectorXd fd(analytic.size());
      for (int i = 0; i < fd.size(); ++i) {
        double fp = g.cost(player, nudged(x, block, i, h));
        double fm = g.cost(player, nudged(x, block, i, -h));
        if (!std::isfinite(fp) || !std::isfinite(fm))
          throw NumericalError("fd_grad_check: cost not finite at probe point");
        fd[i] = (fp - fm) / (2 * h);
      }
      fold_err(rep, analytic, fd, cfg);
    }
  }
  return rep;
}

FdCheckReport fd_sovp_check(const GameOracle& g, const JointPoint& x, const FdConfig& cfg,
                            std::uint64_t seed, int dirs_per_block) {
  require_dims(x, g.dims(), "fd_sovp_check");
  const double h = fd_scale(x, cfg.step);
  auto rng = make_rng(seed, seed_task::kProbe, 1);
  std::normal_distribution<double> gauss;
  FdCheckReport rep;

  for (int player = 1; player <= 2; ++player) {
    for (int gb = 1; gb <= 2; ++gb) {
      for (int wb = 1; wb <= 2; ++wb) {
        int dim = wb == 1 ? g.dims().d1 : g.dims().d2;
        for (int t = 0; t < dirs_per_block; ++t) {
          VectorXd v(dim);
          for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
          double vn = v.norm();
          if (vn == 0) continue;
          VectorXd analytic = g.sovp(player, gb, wb, x, v);
          JointPoint xp = x, xm = x;
          xp.block(wb) += (h / vn) * v;
          xm.block(wb) -= (h / vn) * v;
          VectorXd fd = (g.grad(player, gb, xp) - g.grad(player, gb, xm)) * (vn / (2 * h));
          fold_err(rep, analytic, fd, cfg);
        }
      }
    }
  }
  return rep;
}

namespace {

class FdOracle final : public GameOracle {
 public:
  FdOracle(BlockDims dims, std::function<double(const JointPoint&)> f1,
           std::function<double(const JointPoint&)> f2, FdConfig cfg)
      : dims_(dims), f1_(std::move(f1)), f2_(std::move(f2)), cfg_(cfg) {
    dims_.require_valid();
    // Nested differencing loses half the digits; don't go below the
    // fourth-root-of-eps sweet spot for the second-order probes.
    sovp_step_ = std::max(cfg_.step, 1e-4);
  }

  BlockDims dims() const override { return dims_; }

  double cost(int player, const JointPoint& x) const override {
    check_player(player);
    require_dims(x, dims_, "FdOracle::cost");
    double v = player == 1 ? f1_(x) : f2_(x);
    if (!std::isfinite(v)) throw NumericalError("FdOracle: cost not finite");
    return v;
  }

  VectorXd grad(int player, int block, const JointPoint& x) const override {
    check_player(player);
    check_block(block);
    require_dims(x, dims_, "FdOracle::grad");
    return grad_step(player, block, x, fd_scale(x, cfg_.step));
  }

  VectorXd sovp(int player, int grad_block, int wrt_block, const JointPoint& x,
                const VectorXd& v) const override {
    check_player(player);
    check_block(grad_block);
    check_block(wrt_block);
    require_dims(x, dims_, "FdOracle::sovp");
    int dim = wrt_block == 1 ? dims_.d1 : dims_.d2;
    if (v.size() != dim) throw ContractViolation("FdOracle::sovp: direction size mismatch");
    double vn = v.norm();
    if (vn == 0) return VectorXd::Zero(grad_block == 1 ? dims_.d1 : dims_.d2);
    const double h = fd_scale(x, sovp_step_);
    JointPoint xp = x, xm = x;
    xp.block(wrt_block) += (h / vn) * v;
    xm.block(wrt_block) -= (h / vn) * v;
    VectorXd gp = grad_step(player, grad_block, xp, h);
    VectorXd gm = grad_step(player, grad_block, xm, h);
    return (gp - gm) * (vn / (2 * h));
  }

  bool derivatives_approximate() const override { return true; }

 private:
  VectorXd grad_step(int player, int block, const JointPoint& x, double h) const {
    const auto& f = player == 1 ? f1_ : f2_;
    int dim = block == 1 ? dims_.d1 : dims_.d2;
    VectorXd out(dim);
    JointPoint y = x;
    for (int i = 0; i < dim; ++i) {
      double orig = y.block(block)[i];
      y.block(block)[i] = orig + h;
      double fp = f(y);
      y.block(block)[i] = orig - h;
      double fm = f(y);
      y.block(block)[i] = orig;
      if (!std::isfinite(fp) || !std::isfinite(fm))
        throw NumericalError("FdOracle: cost not finite at probe point");
      out[i] = (fp - fm) / (2 * h);
    }
    return out;
  }

  BlockDims dims_;
  std::function<double(const JointPoint&)> f1_, f2_;
  FdConfig cfg_;
  double sovp_step_;
};

}  // namespace

std::shared_ptr<GameOracle> fd_oracle_from_costs(BlockDims dims,
                                                 std::function<double(const JointPoint&)> f1,
                                                 std::function<double(const JointPoint&)> f2,
                                                 const FdConfig& cfg) {
  return std::make_shared<FdOracle>(dims, std::move(f1), std::move(f2), cfg);
}

}  // namespace stackdyn
