#pragma once

#include <Eigen/Core>
#include <cmath>

#include "stackdyn/errors.hpp"

namespace stackdyn {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BlockDims {
  int d1 = 0;
  int d2 = 0;

  int total() const { return d1 + d2; }
  bool operator==(const BlockDims&) const = default;

  void require_valid() const {
    if (d1 < 1 || d2 < 1) throw ContractViolation("block dims must be >= 1");
  }
};

// A joint strategy: leader block x1, follower block x2.
struct JointPoint {
  VectorXd x1;
  VectorXd x2;

  JointPoint() = default;
  JointPoint(VectorXd a, VectorXd b) : x1(std::move(a)), x2(std::move(b)) {}

  static JointPoint Zero(BlockDims d) {
    return {VectorXd::Zero(d.d1), VectorXd::Zero(d.d2)};
  }

  BlockDims dims() const { return {static_cast<int>(x1.size()), static_cast<int>(x2.size())}; }

  const VectorXd& block(int b) const {
    if (b == 1) return x1;
    if (b == 2) return x2;
    throw ContractViolation("block index must be 1 or 2");
  }
  VectorXd& block(int b) {
    if (b == 1) return x1;
    if (b == 2) return x2;
    throw ContractViolation("block index must be 1 or 2");
  }

  VectorXd flat() const {
    VectorXd v(x1.size() + x2.size());
    v << x1, x2;
    return v;
  }

  static JointPoint from_flat(BlockDims d, const VectorXd& v) {
    if (v.size() != d.total()) throw ContractViolation("flat vector does not match dims");
    return {v.head(d.d1), v.tail(d.d2)};
  }

  double norm() const { return std::sqrt(x1.squaredNorm() + x2.squaredNorm()); }

  double inf_norm() const {
    double a = x1.size() ? x1.cwiseAbs().maxCoeff() : 0.0;
    double b = x2.size() ? x2.cwiseAbs().maxCoeff() : 0.0;
    return std::max(a, b);
  }

  bool all_finite() const { return x1.allFinite() && x2.allFinite(); }

  JointPoint operator+(const JointPoint& o) const { return {x1 + o.x1, x2 + o.x2}; }
  JointPoint operator-(const JointPoint& o) const { return {x1 - o.x1, x2 - o.x2}; }
  JointPoint operator*(double s) const { return {s * x1, s * x2}; }
};

inline void require_dims(const JointPoint& x, BlockDims d, const char* where) {
  if (x.dims() != d)
    throw ContractViolation(std::string(where) + ": point dims do not match oracle dims");
}

}  // namespace stackdyn
