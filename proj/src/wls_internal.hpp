#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "robustmm/sample.hpp"

namespace robustmm::detail {

struct WhitenedSample {
  std::vector<Eigen::MatrixXd> Xw;
  std::vector<Eigen::VectorXd> yw;
};

inline WhitenedSample whiten_sample(const BalancedSample& s, const MahalanobisContext& ctx) {
  WhitenedSample w;
  w.Xw.reserve(s.n);
  w.yw.reserve(s.n);
  for (int i = 0; i < s.n; ++i) {
    w.Xw.push_back(ctx.whiten(s.X[i]));
    w.yw.push_back(ctx.whiten(s.y[i]));
  }
  return w;
}

// argmin_b sum_i wt_i ||yw_i - Xw_i b||^2, or nullopt when the weighted
// normal matrix is numerically rank-deficient.
inline std::optional<Eigen::VectorXd> weighted_gls(const WhitenedSample& w,
                                                   const std::vector<double>& wt, int q) {
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(q);
  for (std::size_t i = 0; i < w.Xw.size(); ++i) {
    if (!(wt[i] > 0.0)) continue;
    A.noalias() += wt[i] * w.Xw[i].transpose() * w.Xw[i];
    b.noalias() += wt[i] * w.Xw[i].transpose() * w.yw[i];
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  if (ldlt.info() != Eigen::Success) return std::nullopt;
  const double dmax = ldlt.vectorD().maxCoeff();
  if (!(dmax > 0.0) || ldlt.vectorD().minCoeff() < 1e-13 * dmax) return std::nullopt;
  return Eigen::VectorXd(ldlt.solve(b));
}

}  // namespace robustmm::detail
