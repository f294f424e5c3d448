#include "stackdyn/opalg.hpp"

namespace stackdyn {

LinearMap jacobian_simgrad(const GameOracle& g, const JointPoint& x) {
  require_dims(x, g.dims(), "jacobian_simgrad");
  const BlockDims d = g.dims();
  return {d.total(), d.total(),
          [&g, x, d](const VectorXd& v) {
            VectorXd v1 = v.head(d.d1);
            VectorXd v2 = v.tail(d.d2);
            VectorXd top = g.sovp(1, 1, 1, x, v1) + g.sovp(1, 1, 2, x, v2);
            VectorXd bot = g.sovp(2, 2, 1, x, v1) + g.sovp(2, 2, 2, x, v2);
            VectorXd out(d.total());
            out << top, bot;
            return out;
          },
          false};
}

MatrixXd jacobian_stackelberg(const GameOracle& g, const JointPoint& x, double eta,
                              double fd_step, int cap) {
  require_dims(x, g.dims(), "jacobian_stackelberg");
  const BlockDims bd = g.dims();
  const int d = bd.total();
  if (d > cap)
    throw SizeCapError("jacobian_stackelberg: joint dimension " + std::to_string(d) +
                       " exceeds dense cap " + std::to_string(cap));
  const double h = fd_scale(x, fd_step);
  const SolveConfig cfg = SolveConfig::exact(bd.d2);

  MatrixXd j(d, d);
  VectorXd base = x.flat();
  for (int col = 0; col < d; ++col) {
    VectorXd fp = base, fm = base;
    fp[col] += h;
    fm[col] -= h;
    JointPoint xp = JointPoint::from_flat(bd, fp);
    JointPoint xm = JointPoint::from_flat(bd, fm);
    VectorXd wp = omega_stackelberg(g, xp, eta, cfg).flat();
    VectorXd wm = omega_stackelberg(g, xm, eta, cfg).flat();
    j.col(col) = (wp - wm) / (2 * h);
  }
  if (!j.allFinite()) throw NumericalError("jacobian_stackelberg: non-finite entries");
  return j;
}

LinearMap schur_complement(const GameOracle& g, const JointPoint& x, double eta) {
  require_dims(x, g.dims(), "schur_complement");
  const BlockDims d = g.dims();
  const SolveConfig cfg = SolveConfig::exact(d.d2);
  return {d.d1, d.d1,
          [&g, x, eta, d, cfg](const VectorXd& v) {
            VectorXd p = g.sovp(1, 1, 1, x, v);       // D1^2 f1 v
            VectorXd u = g.sovp(2, 2, 1, x, v);       // D21 f2 v
            LinearMap curv{d.d2, d.d2,
                           [&g, &x, eta](const VectorXd& z) {
                             VectorXd out = g.sovp(2, 2, 2, x, z);
                             if (eta != 0.0) out += eta * z;
                             return out;
                           },
                           true};
            SolveResult sol;
            try {
              sol = cg_solve(curv, u, cfg);
            } catch (const IndefiniteOperatorError& e) {
              if (eta == 0.0)
                throw SingularOperatorError(
                    std::string("schur_complement: follower curvature singular: ") + e.what(),
                    u.norm());
              throw;
            }
            VectorXd q = g.sovp(1, 1, 2, x, sol.x);   // D12 f1 w
            return VectorXd(p - q);
          },
          g.zero_sum()};
}

}  // namespace stackdyn
