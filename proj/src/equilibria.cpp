#include "stackdyn/equilibria.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "stackdyn/opalg.hpp"
#include "stackdyn/rng.hpp"

namespace stackdyn {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

LinearMap hessian_block(const GameOracle& g, const JointPoint& x, int player) {
  const int d = player == 1 ? x.dims().d1 : x.dims().d2;
  return {d, d,
          [&g, x, player](const VectorXd& v) { return g.sovp(player, player, player, x, v); },
          true};
}

// Full spectrum when the block fits the dense cap, otherwise the extremal ends
// from both sides (enough for definiteness verdicts and bands).
SpectrumReport sym_block_spectrum(const LinearMap& h) {
  if (h.rows <= dense_cap()) return eig_dense(materialize(h));
  const int k = std::min(4, h.rows);
  SpectrumReport lo = eig_extremal(h, k, ExtremalSide::smallest);
  SpectrumReport hi = eig_extremal(h, k, ExtremalSide::largest);
  std::vector<std::pair<std::complex<double>, double>> all;
  for (std::size_t i = 0; i < lo.eigs.size(); ++i) all.emplace_back(lo.eigs[i], lo.residuals[i]);
  for (std::size_t i = 0; i < hi.eigs.size(); ++i) all.emplace_back(hi.eigs[i], hi.residuals[i]);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first.real() != b.first.real()) return a.first.real() < b.first.real();
    return a.first.imag() < b.first.imag();
  });
  SpectrumReport rep;
  rep.method = "iterative";
  rep.k = lo.k + hi.k;
  rep.converged = lo.converged && hi.converged;
  for (auto& [e, r] : all) {
    rep.eigs.push_back(e);
    rep.residuals.push_back(r);
  }
  return rep;
}

DefinitenessVerdict definiteness_from(const SpectrumReport& rep, double tol) {
  DefinitenessVerdict v;
  if (rep.eigs.empty()) return v;
  double mn = kInf, closest = kInf;
  for (auto& e : rep.eigs) {
    mn = std::min(mn, e.real());
    closest = std::min(closest, std::abs(e.real()));
  }
  v.band = tol * (1.0 + rep.max_abs());
  v.min_eig = mn;
  v.positive_definite = mn > v.band;
  v.positive_semidefinite = mn >= -v.band;
  v.marginal = closest <= v.band;
  return v;
}

StabilityVerdict stability_from(const SpectrumReport& rep, double tol) {
  StabilityVerdict v;
  if (rep.eigs.empty()) return v;
  double mn = kInf, closest = kInf;
  for (auto& e : rep.eigs) {
    mn = std::min(mn, e.real());
    closest = std::min(closest, std::abs(e.real()));
  }
  v.band = tol * (1.0 + rep.max_abs());
  v.min_real = mn;
  v.stable = mn > v.band;
  v.marginal = closest <= v.band;
  return v;
}

// Largest singular value of the cross block D21 f2. Dense SVD when it fits,
// otherwise power iteration on B^T B using the transpose identity
// (D21 f2)^T = D12 f2.
double cross_block_norm(const GameOracle& g, const JointPoint& x) {
  const BlockDims d = g.dims();
  LinearMap b{d.d2, d.d1,
              [&g, x](const VectorXd& v) { return g.sovp(2, 2, 1, x, v); }};
  if (std::max(d.d1, d.d2) <= dense_cap()) {
    MatrixXd bm = materialize(b, std::max(d.d1, d.d2));
    return bm.jacobiSvd().singularValues()(0);
  }
  VectorXd v = VectorXd::Ones(d.d1) / std::sqrt(double(d.d1));
  double lam = 0.0;
  for (int it = 0; it < 300; ++it) {
    VectorXd w = g.sovp(2, 1, 2, x, g.sovp(2, 2, 1, x, v));
    double nw = w.norm();
    if (nw == 0.0) return 0.0;
    double lam_new = v.dot(w);
    w /= nw;
    if (std::abs(lam_new - lam) <= 1e-13 * (1.0 + std::abs(lam_new)) && it > 2) {
      lam = lam_new;
      break;
    }
    lam = lam_new;
    v = w;
  }
  return std::sqrt(std::max(0.0, lam));
}

void check_zero_sum_gates(const GameOracle& g, const JointPoint& x, std::uint64_t probe_seed,
                          bool probe) {
  if (!g.zero_sum())
    throw GateError("gate failed: oracle does not declare zero-sum costs");
  if (!probe) return;
  auto rng = make_rng(probe_seed, seed_task::kProbe);
  std::normal_distribution<double> nd(0.0, 1.0);
  const double scale = 1.0 + x.inf_norm();
  for (int i = 0; i < 10; ++i) {
    JointPoint p = x;
    for (int j = 0; j < p.x1.size(); ++j) p.x1(j) += scale * nd(rng);
    for (int j = 0; j < p.x2.size(); ++j) p.x2(j) += scale * nd(rng);
    const double f1 = g.cost(1, p), f2 = g.cost(2, p);
    if (std::abs(f1 + f2) > 1e-8 * (1.0 + std::abs(f1)))
      throw GateError("gate failed: costs do not sum to zero at probe points");
  }
}

// Shared gate for the attractor condition checks: zero-sum, non-Nash
// attractor of the simultaneous dynamics, positive-definite follower
// curvature.
Classification gate_non_nash_attractor(const GameOracle& g, const JointPoint& x,
                                       double tol_eig) {
  if (!g.zero_sum())
    throw GateError("gate failed: oracle does not declare zero-sum costs");
  ClassifyConfig cc;
  cc.tol_eig = tol_eig;
  Classification c = classify(g, x, cc);
  if (!c.non_nash_attractor)
    throw GateError("gate failed: point is not a non-Nash attractor of the simultaneous dynamics");
  if (!c.hess2.positive_definite)
    throw GateError("gate failed: follower curvature is not positive definite");
  return c;
}

struct AttractorSpectra {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es1, es2;
  std::vector<double> mu;       // ascending
  std::vector<double> lambda;   // descending
  double band_mu = 0.0;
};

AttractorSpectra attractor_spectra(const GameOracle& g, const JointPoint& x, double tol_eig) {
  AttractorSpectra s;
  MatrixXd h1 = materialize(hessian_block(g, x, 1));
  MatrixXd h2 = materialize(hessian_block(g, x, 2));
  s.es1.compute(h1);
  s.es2.compute(h2);
  if (s.es1.info() != Eigen::Success || s.es2.info() != Eigen::Success)
    throw NumericalError("attractor conditions: Hessian eigendecomposition failed");
  double mu_max = 0.0;
  for (int i = 0; i < s.es1.eigenvalues().size(); ++i) {
    s.mu.push_back(s.es1.eigenvalues()(i));
    mu_max = std::max(mu_max, std::abs(s.mu.back()));
  }
  for (int i = s.es2.eigenvalues().size() - 1; i >= 0; --i)
    s.lambda.push_back(s.es2.eigenvalues()(i));
  const double relax = g.derivatives_approximate() ? 10.0 : 1.0;
  s.band_mu = tol_eig * relax * (1.0 + mu_max);
  return s;
}

ConditionReport necessary_report(const GameOracle& g, const JointPoint& x,
                                 const AttractorCheckConfig& cfg, const AttractorSpectra& s) {
  ConditionReport rep;
  rep.mu = s.mu;
  rep.lambda = s.lambda;
  for (double m : s.mu) {
    if (m < -s.band_mu) ++rep.r_neg;
    if (std::abs(m) <= s.band_mu) ++rep.p_ker;
  }
  rep.kappa = cfg.kappa_override ? *cfg.kappa_override : cross_block_norm(g, x);
  const int n = static_cast<int>(s.lambda.size());
  const int want = rep.r_neg - rep.p_ker;
  bool margins_ok = true;
  for (int i = 0; i < std::min(want, n); ++i) {
    rep.margins.push_back(rep.kappa * rep.kappa * s.lambda[i] + s.mu[i]);
    margins_ok = margins_ok && rep.margins.back() > 0.0;
  }
  rep.necessary_holds = (rep.r_neg <= n) && (want <= n) && margins_ok;
  return rep;
}

JointPoint uniform_in_box(const std::vector<std::array<double, 2>>& box, BlockDims d,
                          std::mt19937_64& rng) {
  VectorXd v(d.total());
  for (int j = 0; j < d.total(); ++j) {
    std::uniform_real_distribution<double> u(box[j][0], box[j][1]);
    v(j) = u(rng);
  }
  return JointPoint::from_flat(d, v);
}

bool flat_less(const JointPoint& a, const JointPoint& b) {
  VectorXd fa = a.flat(), fb = b.flat();
  for (int i = 0; i < fa.size(); ++i) {
    if (fa(i) < fb(i)) return true;
    if (fa(i) > fb(i)) return false;
  }
  return false;
}

}  // namespace

Classification classify(const GameOracle& g, const JointPoint& x, const ClassifyConfig& cfg) {
  require_dims(x, g.dims(), "classify");
  if (!x.all_finite()) throw ContractViolation("classify: point has non-finite coordinates");
  const BlockDims d = g.dims();
  const double relax = g.derivatives_approximate() ? 10.0 : 1.0;

  Classification out;
  out.tol_eig = cfg.tol_eig * relax;
  out.tol_residual = cfg.tol_residual * relax * (1.0 + x.norm());

  out.residual_sim = omega(g, x).norm();
  try {
    out.residual_stack = omega_stackelberg(g, x, cfg.eta, SolveConfig::exact(d.d2)).norm();
  } catch (const SingularOperatorError&) {
    out.degenerate_stack = true;
    out.residual_stack = kInf;
  }

  out.spec_hess1 = sym_block_spectrum(hessian_block(g, x, 1));
  out.spec_hess2 = sym_block_spectrum(hessian_block(g, x, 2));
  out.hess1 = definiteness_from(out.spec_hess1, out.tol_eig);
  out.hess2 = definiteness_from(out.spec_hess2, out.tol_eig);

  out.spec_j = eig_dense(materialize(jacobian_simgrad(g, x)));
  out.sim_stability = stability_from(out.spec_j, out.tol_eig);

  if (!out.degenerate_stack) {
    try {
      out.spec_js = eig_dense(jacobian_stackelberg(g, x, cfg.eta));
      out.stack_stability = stability_from(out.spec_js, out.tol_eig);

      LinearMap s1 = schur_complement(g, x, cfg.eta);
      if (d.d1 <= dense_cap()) {
        out.spec_schur = eig_dense(materialize(s1));
      } else if (s1.symmetric_hint) {
        out.spec_schur = sym_block_spectrum(s1);
      } else {
        throw SizeCapError("classify: Schur block exceeds the dense cap and is not symmetric");
      }
      out.schur = definiteness_from(out.spec_schur, out.tol_eig);
    } catch (const SingularOperatorError&) {
      out.degenerate_stack = true;
      out.spec_js = {};
      out.spec_schur = {};
      out.stack_stability = {};
      out.schur = {};
    }
  }

  const bool critical_sim = out.residual_sim < out.tol_residual;
  const bool critical_stack = out.residual_stack < out.tol_residual;

  out.stable_simgrad = out.sim_stability.stable;
  out.stable_stackelberg = !out.degenerate_stack && out.stack_stability.stable;
  out.is_dne = critical_sim && out.hess1.positive_definite && out.hess2.positive_definite;
  out.is_dse = critical_stack && out.schur.positive_definite && out.hess2.positive_definite;
  out.non_nash_attractor = critical_sim && out.stable_simgrad && !out.is_dne;
  out.marginal = out.hess1.marginal || out.hess2.marginal || out.sim_stability.marginal ||
                 out.degenerate_stack ||
                 (!out.degenerate_stack && (out.schur.marginal || out.stack_stability.marginal));
  return out;
}

std::vector<CriticalPoint> find_critical_points(const GameOracle& g,
                                                const std::vector<std::array<double, 2>>& box,
                                                const FindConfig& cfg) {
  const BlockDims d = g.dims();
  if (static_cast<int>(box.size()) != d.total())
    throw ContractViolation("find_critical_points: box size does not match joint dimension");
  for (auto& b : box)
    if (!(b[0] <= b[1]) || !std::isfinite(b[0]) || !std::isfinite(b[1]))
      throw ContractViolation("find_critical_points: malformed box interval");
  if (cfg.n_starts < 1) throw ContractViolation("find_critical_points: n_starts must be >= 1");

  auto field = [&](const JointPoint& p) -> VectorXd {
    if (cfg.field == FieldKind::sim) return omega(g, p).flat();
    return omega_stackelberg(g, p, cfg.eta, SolveConfig::exact(d.d2)).flat();
  };

  std::vector<CriticalPoint> found;
  for (int s = 0; s < cfg.n_starts; ++s) {
    auto rng = make_rng(cfg.seed, seed_task::kSearchStarts, static_cast<std::uint64_t>(s));
    JointPoint start = uniform_in_box(box, d, rng);
    JointPoint cur = start;
    bool ok = false;
    try {
      VectorXd f = field(cur);
      for (int it = 0; it < cfg.max_newton_iters; ++it) {
        double fn = f.norm();
        if (fn < cfg.tol) {
          ok = true;
          break;
        }
        // FD Jacobian of the chosen field, central differences.
        const double h = fd_scale(cur, 1e-6);
        MatrixXd jac(d.total(), d.total());
        VectorXd flat = cur.flat();
        for (int j = 0; j < d.total(); ++j) {
          VectorXd fp = flat, fm = flat;
          fp(j) += h;
          fm(j) -= h;
          jac.col(j) = (field(JointPoint::from_flat(d, fp)) - field(JointPoint::from_flat(d, fm))) /
                       (2.0 * h);
        }
        VectorXd step = jac.fullPivLu().solve(-f);
        if (!step.allFinite()) break;
        // Backtracking on the field norm.
        double t = 1.0;
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
          JointPoint cand = JointPoint::from_flat(d, flat + t * step);
          if (cand.all_finite()) {
            VectorXd fc;
            bool eval_ok = true;
            try {
              fc = field(cand);
            } catch (const SingularOperatorError&) {
              eval_ok = false;
            } catch (const IndefiniteOperatorError&) {
              eval_ok = false;
            }
            if (eval_ok && fc.allFinite() && fc.norm() < (1.0 - 1e-4 * t) * fn) {
              cur = cand;
              f = fc;
              moved = true;
              break;
            }
          }
          t *= 0.5;
        }
        if (!moved) break;
      }
      if (!ok && f.norm() < cfg.tol) ok = true;
    } catch (const SingularOperatorError&) {
      ok = false;
    } catch (const IndefiniteOperatorError&) {
      ok = false;
    }
    if (!ok) continue;

    JointPoint rep = g.canonical(cur);
    bool dup = false;
    for (auto& kept : found) {
      if ((kept.x - rep).norm() <= cfg.dedup_radius) {
        dup = true;
        break;
      }
    }
    if (dup) continue;

    CriticalPoint cp;
    cp.x = rep;
    cp.basin_seed = start;
    cp.residual_sim = omega(g, rep).norm();
    try {
      cp.residual_stack = omega_stackelberg(g, rep, cfg.eta, SolveConfig::exact(d.d2)).norm();
    } catch (const SingularOperatorError&) {
      cp.residual_stack = kInf;
    }
    found.push_back(std::move(cp));
  }

  std::sort(found.begin(), found.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return flat_less(a.x, b.x); });
  return found;
}

StackelbergCoincidence verify_stable_nash_is_stackelberg(const GameOracle& g, const JointPoint& x,
                                                         const ClassifyConfig& cfg,
                                                         std::uint64_t probe_seed) {
  require_dims(x, g.dims(), "verify_stable_nash_is_stackelberg");
  check_zero_sum_gates(g, x, probe_seed, /*probe=*/true);
  Classification c = classify(g, x, cfg);
  if (!(c.is_dne && c.stable_simgrad))
    throw GateError("gate failed: point is not a stable differential Nash equilibrium");
  return {c.is_dse, c.stable_stackelberg, std::move(c)};
}

ConditionReport attractor_necessary_conditions(const GameOracle& g, const JointPoint& x,
                                               const AttractorCheckConfig& cfg) {
  require_dims(x, g.dims(), "attractor_necessary_conditions");
  gate_non_nash_attractor(g, x, cfg.tol_eig);
  AttractorSpectra s = attractor_spectra(g, x, cfg.tol_eig);
  return necessary_report(g, x, cfg, s);
}

ConditionReport attractor_sufficient_structure(const GameOracle& g, const JointPoint& x,
                                               const AttractorCheckConfig& cfg) {
  require_dims(x, g.dims(), "attractor_sufficient_structure");
  gate_non_nash_attractor(g, x, cfg.tol_eig);
  AttractorSpectra s = attractor_spectra(g, x, cfg.tol_eig);
  ConditionReport rep = necessary_report(g, x, cfg, s);

  const int m = static_cast<int>(s.mu.size());
  const int n = static_cast<int>(s.lambda.size());

  // Cross-curvature in the shared eigenbasis. Columns of W2 are reordered to
  // match the descending lambda used everywhere else.
  MatrixXd d12(m, n);
  {
    const MatrixXd& w2asc = s.es2.eigenvectors();
    for (int j = 0; j < n; ++j) {
      VectorXd col = g.sovp(1, 1, 2, x, VectorXd::Unit(n, j));
      d12.col(j) = col;
    }
    MatrixXd w2(n, n);
    for (int j = 0; j < n; ++j) w2.col(j) = w2asc.col(n - 1 - j);
    d12 = s.es1.eigenvectors().transpose() * d12 * w2;
  }
  const double scale = 1.0 + d12.cwiseAbs().maxCoeff();
  const double tol = cfg.structure_tol * scale;

  // Group indices sharing an eigenvalue; rotations inside a group are free, so
  // diagonality is only required across distinct eigenvalues.
  double lam_max = 0.0;
  for (double l : s.lambda) lam_max = std::max(lam_max, std::abs(l));
  const double relax = g.derivatives_approximate() ? 10.0 : 1.0;
  const double band_lam = cfg.tol_eig * relax * (1.0 + lam_max);
  std::vector<int> rg(m), cg(n);
  for (int i = 1; i < m; ++i)
    rg[i] = (s.mu[i] - s.mu[i - 1] <= s.band_mu) ? rg[i - 1] : rg[i - 1] + 1;
  for (int j = 1; j < n; ++j)
    cg[j] = (s.lambda[j - 1] - s.lambda[j] <= band_lam) ? cg[j - 1] : cg[j - 1] + 1;

  const int diag = std::min(m, n);
  auto allowed = [&](int i, int j) {
    for (int k = 0; k < diag; ++k)
      if (rg[k] == rg[i] && cg[k] == cg[j]) return true;
    return false;
  };

  double offdiag = 0.0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      if (!allowed(i, j)) offdiag = std::max(offdiag, std::abs(d12(i, j)));
  bool holds = offdiag <= tol;

  // Each diagonal block must carry full weight: as many nonzero singular
  // values as it has diagonal slots, otherwise some Sigma entry vanishes.
  for (int a = 0; a <= (m ? rg[m - 1] : 0) && holds; ++a) {
    for (int b = 0; b <= (n ? cg[n - 1] : 0) && holds; ++b) {
      int slots = 0;
      for (int k = 0; k < diag; ++k)
        if (rg[k] == a && cg[k] == b) ++slots;
      if (slots == 0) continue;
      std::vector<int> rows, cols;
      for (int i = 0; i < m; ++i)
        if (rg[i] == a) rows.push_back(i);
      for (int j = 0; j < n; ++j)
        if (cg[j] == b) cols.push_back(j);
      MatrixXd blk(rows.size(), cols.size());
      for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) blk(i, j) = d12(rows[i], cols[j]);
      VectorXd sv = blk.jacobiSvd().singularValues();
      if (sv.size() < slots || sv(slots - 1) <= tol) holds = false;
    }
  }

  rep.structure_holds = holds;
  rep.structure_offdiag = offdiag;
  rep.sufficient_holds = holds && rep.necessary_holds;
  return rep;
}

StackelbergCoincidence verify_scalar_attractor_is_stackelberg(const GameOracle& g,
                                                              const JointPoint& x,
                                                              const ClassifyConfig& cfg,
                                                              std::uint64_t probe_seed) {
  require_dims(x, g.dims(), "verify_scalar_attractor_is_stackelberg");
  if (g.dims().d1 != 1 || g.dims().d2 != 1)
    throw GateError("gate failed: both strategy blocks must be one-dimensional");
  check_zero_sum_gates(g, x, probe_seed, /*probe=*/true);
  Classification c = classify(g, x, cfg);
  if (!c.non_nash_attractor)
    throw GateError("gate failed: point is not a non-Nash attractor of the simultaneous dynamics");
  if (!c.hess2.positive_definite)
    throw GateError("gate failed: follower curvature is not positive definite");
  return {c.is_dse, c.stable_stackelberg, std::move(c)};
}

RealizabilityReport check_realizable(const GameOracle& g, const JointPoint& x, double tol) {
  require_dims(x, g.dims(), "check_realizable");
  const double relax = g.derivatives_approximate() ? 10.0 : 1.0;
  const double wn = omega(g, x).norm();
  if (wn > 1e-5 * relax * (1.0 + x.norm()))
    throw ContractViolation("check_realizable: point is not critical for the simultaneous field");

  RealizabilityReport rep;
  SpectrumReport h1 = sym_block_spectrum(hessian_block(g, x, 1));
  rep.leader_curvature_norm = h1.max_abs();
  rep.realizable = rep.leader_curvature_norm < tol;

  try {
    SpectrumReport js = eig_dense(jacobian_stackelberg(g, x, 0.0));
    double mn = kInf;
    for (auto& e : js.eigs) mn = std::min(mn, e.real());
    const double band = 1e-6 * relax * (1.0 + js.max_abs());
    rep.marginal_stack = js.eigs.empty() ? false : mn >= -band;
  } catch (const SingularOperatorError&) {
    rep.marginal_stack = false;
  }
  return rep;
}

LeaderCostComparison leader_cost_comparison(const GameOracle& g,
                                            const std::vector<JointPoint>& nash,
                                            const std::vector<JointPoint>& stackelberg,
                                            double tol) {
  if (nash.empty())
    throw ContractViolation("leader_cost_comparison: needs at least one Nash point");
  LeaderCostComparison out;
  out.best_nash_cost = kInf;
  for (auto& p : nash) {
    require_dims(p, g.dims(), "leader_cost_comparison");
    out.best_nash_cost = std::min(out.best_nash_cost, g.cost(1, p));
  }
  for (auto& p : stackelberg) {
    require_dims(p, g.dims(), "leader_cost_comparison");
    const double c = g.cost(1, p);
    out.stackelberg_costs.push_back(c);
    const bool v = c > out.best_nash_cost + tol * (1.0 + std::abs(out.best_nash_cost));
    out.violates.push_back(v);
    out.any_violation = out.any_violation || v;
  }
  return out;
}

}  // namespace stackdyn
