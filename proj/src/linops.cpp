#include "stackdyn/linops.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cstdlib>
#include <random>

#include "stackdyn/rng.hpp"

namespace stackdyn {

int dense_cap() {
  static const int cap = [] {
    if (const char* s = std::getenv("STACKDYN_DENSE_CAP")) {
      int v = std::atoi(s);
      if (v > 0) return v;
    }
    return 64;
  }();
  return cap;
}

SolveResult cg_solve(const LinearMap& a, const VectorXd& b, const SolveConfig& cfg) {
  if (a.rows != a.cols) throw ContractViolation("cg_solve: operator must be square");
  if (b.size() != a.rows) throw ContractViolation("cg_solve: rhs size != operator rows");

  const int n = a.rows;
  VectorXd x = cfg.warm_start && cfg.warm_start->size() == n ? *cfg.warm_start
                                                             : VectorXd::Zero(n);
  VectorXd r = b - a(x);
  VectorXd p = r;
  double rs = r.squaredNorm();
  const int budget = std::min(cfg.max_iters, n);
  int it = 0;
  for (; it < budget && std::sqrt(rs) > cfg.tol; ++it) {
    VectorXd ap = a(p);
    double pap = p.dot(ap);
    // Signed curvature is fine (symmetric indefinite systems still solve);
    // only near-zero curvature is a genuine breakdown.
    if (std::abs(pap) <= 1e-14 * p.squaredNorm()) {
      throw IndefiniteOperatorError("cg_solve: near-zero curvature, operator not solvable here");
    }
    double alpha = rs / pap;
    x += alpha * p;
    r -= alpha * ap;
    double rs_next = r.squaredNorm();
    p = r + (rs_next / rs) * p;
    rs = rs_next;
  }
  double res = (a(x) - b).norm();
  return {std::move(x), res, it};
}

MatrixXd materialize(const LinearMap& a, int cap) {
  if (a.rows > cap || a.cols > cap)
    throw SizeCapError("materialize: operator " + std::to_string(a.rows) + "x" +
                       std::to_string(a.cols) + " exceeds dense cap " + std::to_string(cap));
  MatrixXd m(a.rows, a.cols);
  VectorXd e = VectorXd::Zero(a.cols);
  for (int j = 0; j < a.cols; ++j) {
    e[j] = 1.0;
    m.col(j) = a(e);
    e[j] = 0.0;
  }
  return m;
}

bool is_linear(const LinearMap& a, std::uint64_t seed, int trials, double tol) {
  auto rng = make_rng(seed, seed_task::kProbe);
  std::normal_distribution<double> gauss;
  for (int t = 0; t < trials; ++t) {
    VectorXd x(a.cols), y(a.cols);
    for (int i = 0; i < a.cols; ++i) { x[i] = gauss(rng); y[i] = gauss(rng); }
    double alpha = gauss(rng);
    VectorXd lhs = a(alpha * x + y);
    VectorXd rhs = alpha * a(x) + a(y);
    double scale = std::max(1.0, std::max(lhs.norm(), rhs.norm()));
    if ((lhs - rhs).norm() > tol * scale) return false;
  }
  return true;
}

namespace {

void sort_spectrum(SpectrumReport& rep) {
  std::vector<int> idx(rep.eigs.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  std::sort(idx.begin(), idx.end(), [&](int i, int j) {
    if (rep.eigs[i].real() != rep.eigs[j].real()) return rep.eigs[i].real() < rep.eigs[j].real();
    return rep.eigs[i].imag() < rep.eigs[j].imag();
  });
  std::vector<std::complex<double>> e(idx.size());
  std::vector<double> r(idx.size());
  for (size_t i = 0; i < idx.size(); ++i) {
    e[i] = rep.eigs[idx[i]];
    r[i] = rep.residuals[idx[i]];
  }
  rep.eigs = std::move(e);
  rep.residuals = std::move(r);
}

bool nearly_symmetric(const MatrixXd& m) {
  if (m.rows() != m.cols()) return false;
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * scale;
}

}  // namespace

SpectrumReport eig_dense(const MatrixXd& m) {
  if (m.rows() != m.cols()) throw ContractViolation("eig_dense: matrix must be square");
  SpectrumReport rep;
  rep.method = "dense";
  rep.k = static_cast<int>(m.rows());
  const double mnorm = std::max(m.norm(), 1e-300);

  if (nearly_symmetric(m)) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success)
      throw NumericalError("eig_dense: self-adjoint iteration failed");
    for (int i = 0; i < m.rows(); ++i) {
      double lam = es.eigenvalues()[i];
      VectorXd v = es.eigenvectors().col(i);
      rep.eigs.emplace_back(lam, 0.0);
      rep.residuals.push_back((m * v - lam * v).norm());
    }
  } else {
    Eigen::EigenSolver<MatrixXd> es(m);
    if (es.info() != Eigen::Success) throw NumericalError("eig_dense: QR iteration failed");
    for (int i = 0; i < m.rows(); ++i) {
      std::complex<double> lam = es.eigenvalues()[i];
      Eigen::VectorXcd v = es.eigenvectors().col(i);
      rep.eigs.push_back(lam);
      rep.residuals.push_back((m.cast<std::complex<double>>() * v - lam * v).norm());
    }
  }
  sort_spectrum(rep);
  for (double r : rep.residuals) {
    if (!(r < 1e-8 * std::max(mnorm, 1.0)))
      throw NumericalError("eig_dense: eigenpair residual " + std::to_string(r) +
                           " above backward-error bound");
  }
  return rep;
}

namespace {

// Lanczos with full reorthogonalization. Small dimensions rule this artifact,
// so simplicity beats restart sophistication; the dense fallback catches
// everything under the cap anyway.
SpectrumReport lanczos_extremal(const LinearMap& a, int k, ExtremalSide side) {
  const int n = a.rows;
  const int max_steps = std::min(n, std::max(12 * k + 60, 90));
  auto rng = make_rng(0x5eedbeef, seed_task::kProbe, static_cast<std::uint64_t>(n));
  std::normal_distribution<double> gauss;

  MatrixXd v_basis(n, max_steps + 1);
  std::vector<double> alpha, beta;  // tridiagonal entries
  VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  v.normalize();
  v_basis.col(0) = v;

  SpectrumReport rep;
  rep.method = "iterative";
  rep.k = k;

  VectorXd w;
  int m = 0;
  double op_scale = 1e-300;
  for (int j = 0; j < max_steps; ++j) {
    w = a(v_basis.col(j));
    double aj = v_basis.col(j).dot(w);
    alpha.push_back(aj);
    w -= aj * v_basis.col(j);
    if (j > 0) w -= beta[j - 1] * v_basis.col(j - 1);
    // full reorthogonalization, twice for safety
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) w -= v_basis.col(i).dot(w) * v_basis.col(i);
    double bj = w.norm();
    m = j + 1;
    op_scale = std::max(op_scale, std::abs(aj) + (j > 0 ? beta[j - 1] : 0.0) + bj);

    // Convergence test on the current tridiagonal every few steps.
    bool check_now = (m >= std::max(2 * k, k + 2)) && (m % 2 == 0 || m == max_steps || bj <= 1e-13 * op_scale);
    if (check_now) {
      MatrixXd t = MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
      for (int i = 0; i + 1 < m; ++i) {
        t(i, i + 1) = beta[i];
        t(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
      // Ritz residual bound: |beta_m * s_{m,i}| for Ritz pair i.
      std::vector<int> order(m);
      for (int i = 0; i < m; ++i) order[i] = i;
      if (side == ExtremalSide::largest)
        std::reverse(order.begin(), order.end());
      bool all_ok = true;
      std::vector<std::complex<double>> eigs;
      std::vector<double> resids;
      for (int i = 0; i < std::min(k, m); ++i) {
        int q = order[i];
        double resid = bj * std::abs(es.eigenvectors()(m - 1, q));
        eigs.emplace_back(es.eigenvalues()[q], 0.0);
        resids.push_back(resid);
        if (resid > 1e-9 * std::max(op_scale, 1.0)) all_ok = false;
      }
      if (all_ok || bj <= 1e-13 * op_scale || m == max_steps) {
        rep.eigs = std::move(eigs);
        rep.residuals = std::move(resids);
        rep.converged = all_ok || bj <= 1e-13 * op_scale;
        sort_spectrum(rep);
        return rep;
      }
    }
    if (bj <= 1e-13 * op_scale) break;  // invariant subspace found before first check
    beta.push_back(bj);
    v_basis.col(j + 1) = w / bj;
  }

  // Invariant subspace smaller than requested checks: report what the
  // tridiagonal has.
  MatrixXd t = MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) t(i, i) = alpha[i];
  for (int i = 0; i + 1 < m; ++i) {
    t(i, i + 1) = beta[i];
    t(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(t);
  std::vector<int> order(m);
  for (int i = 0; i < m; ++i) order[i] = i;
  if (side == ExtremalSide::largest) std::reverse(order.begin(), order.end());
  for (int i = 0; i < std::min(k, m); ++i) {
    rep.eigs.emplace_back(es.eigenvalues()[order[i]], 0.0);
    rep.residuals.push_back(0.0);
  }
  sort_spectrum(rep);
  return rep;
}

}  // namespace

SpectrumReport eig_extremal(const LinearMap& a, int k, ExtremalSide side, int cap) {
  if (a.rows != a.cols) throw ContractViolation("eig_extremal: operator must be square");
  if (!a.symmetric_hint)
    throw ContractViolation("eig_extremal: operator must carry symmetric_hint");
  if (k < 1 || k > a.rows) throw ContractViolation("eig_extremal: k out of range");

  if (a.rows <= cap) {
    MatrixXd m = materialize(a, cap);
    MatrixXd ms = 0.5 * (m + m.transpose());  // symmetric by contract; scrub roundoff
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(ms);
    if (es.info() != Eigen::Success)
      throw NumericalError("eig_extremal: dense self-adjoint iteration failed");
    SpectrumReport rep;
    rep.method = "dense";
    rep.k = k;
    for (int i = 0; i < k; ++i) {
      int q = side == ExtremalSide::smallest ? i : a.rows - 1 - i;
      double lam = es.eigenvalues()[q];
      VectorXd v = es.eigenvectors().col(q);
      rep.eigs.emplace_back(lam, 0.0);
      rep.residuals.push_back((ms * v - lam * v).norm());
    }
    sort_spectrum(rep);
    return rep;
  }
  return lanczos_extremal(a, k, side);
}

double spectral_norm(const LinearMap& a, int cap) {
  MatrixXd m = materialize(a, cap);
  return m.jacobiSvd().singularValues()[0];
}

}  // namespace stackdyn
