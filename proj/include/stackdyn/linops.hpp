#pragma once

#include <Eigen/Core>
#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "stackdyn/errors.hpp"

namespace stackdyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Matrix-free linear operator. apply must be linear; symmetric_hint marks maps
// that are symmetric by construction so downstream eigensolvers can pick the
// symmetric path without probing.
struct LinearMap {
  int rows = 0;
  int cols = 0;
  std::function<VectorXd(const VectorXd&)> apply;
  bool symmetric_hint = false;

  VectorXd operator()(const VectorXd& v) const {
    if (v.size() != cols) throw ContractViolation("LinearMap: input size != cols");
    VectorXd out = apply(v);
    if (out.size() != rows) throw ContractViolation("LinearMap: operator produced wrong size");
    return out;
  }

  static LinearMap from_matrix(const MatrixXd& m, bool symmetric = false) {
    return {static_cast<int>(m.rows()), static_cast<int>(m.cols()),
            [m](const VectorXd& v) { return VectorXd(m * v); }, symmetric};
  }

  static LinearMap identity(int n) {
    return {n, n, [](const VectorXd& v) { return v; }, true};
  }

  // A + shift*I, same shape.
  LinearMap shifted(double shift) const {
    if (rows != cols) throw ContractViolation("shifted: operator must be square");
    auto base = *this;
    return {rows, cols, [base, shift](const VectorXd& v) { return VectorXd(base(v) + shift * v); },
            symmetric_hint};
  }
};

// Dimension cap below which operators may be materialized densely.
// Default 64; override with env STACKDYN_DENSE_CAP.
int dense_cap();

struct SolveConfig {
  int max_iters = 5;       // matches the stepper's cheap-solve budget
  double tol = 1e-10;      // residual norm target
  std::optional<VectorXd> warm_start;

  // Budget-equals-dimension config used by classification-grade solves.
  static SolveConfig exact(int dim) {
    SolveConfig c;
    c.max_iters = dim;
    return c;
  }
};

struct SolveResult {
  VectorXd x;
  double residual = 0.0;   // ||A x - b|| recomputed at exit
  int iters = 0;
};

// Conjugate gradients on a symmetric operator. Iterations are capped at
// min(max_iters, rows). Throws IndefiniteOperatorError on near-zero curvature.
SolveResult cg_solve(const LinearMap& a, const VectorXd& b, const SolveConfig& cfg = {});

// Dense matrix from a map by applying it to the canonical basis.
// Throws SizeCapError when either dimension exceeds the cap.
MatrixXd materialize(const LinearMap& a, int cap = dense_cap());

// Probabilistic linearity check: apply(alpha x + y) vs alpha apply(x) + apply(y)
// at `trials` random pairs. Used by tests and debug assertions.
bool is_linear(const LinearMap& a, std::uint64_t seed = 0, int trials = 8, double tol = 1e-8);

struct SpectrumReport {
  std::vector<std::complex<double>> eigs;  // sorted by (re, im) ascending
  std::vector<double> residuals;           // backward errors ||Av - lambda v||, ||v||=1
  std::string method;                      // "dense" | "iterative"
  int k = 0;                               // how many eigenvalues were requested
  bool converged = true;

  double max_abs() const {
    double m = 0;
    for (auto& e : eigs) m = std::max(m, std::abs(e));
    return m;
  }
};

// Full dense spectrum. Symmetric inputs take the self-adjoint path and come
// back with exactly real eigenvalues.
SpectrumReport eig_dense(const MatrixXd& m);

enum class ExtremalSide { smallest, largest };

// k extremal eigenvalues of a symmetric operator. Dense fallback when
// dim <= cap, otherwise Lanczos with full reorthogonalization. Non-convergence
// within the iteration budget returns partial results with converged = false.
SpectrumReport eig_extremal(const LinearMap& a, int k, ExtremalSide side, int cap = dense_cap());

// Largest singular value of a materialized map.
double spectral_norm(const LinearMap& a, int cap = dense_cap());

}  // namespace stackdyn
