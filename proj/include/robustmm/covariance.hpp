#pragma once

#include <Eigen/Dense>
#include <vector>

namespace robustmm {

enum class CovKind { MixedEffects, Unstructured, AR1, Toeplitz };

// Identifiable parameterization theta -> V(theta) in PDS(k).
//
//   MixedEffects:  V = sigma0^2 I + sum_j sigma_j^2 Z_j Z_j^T,
//                  theta = (sigma0^2, sigma1^2, ..., sigma_r^2), l = r + 1
//   Unstructured:  theta = vech(C) stacked by columns of the lower triangle,
//                  l = k(k+1)/2
//   AR1:           v_st = sigma^2 rho^|s-t|, theta = (sigma^2, rho), l = 2
//   Toeplitz:      v_st = theta_{|s-t|+1}, l = k
class CovarianceStructure {
 public:
  static CovarianceStructure mixed_effects(int k, std::vector<Eigen::MatrixXd> designs);
  static CovarianceStructure unstructured(int k);
  static CovarianceStructure ar1(int k);
  static CovarianceStructure toeplitz(int k);

  CovKind kind() const noexcept { return kind_; }
  int k() const noexcept { return k_; }
  int param_dim() const noexcept { return l_; }
  const std::vector<Eigen::MatrixXd>& designs() const noexcept { return designs_; }

  // Throws InvalidParams when theta is outside the valid domain.
  void validate(const Eigen::VectorXd& theta) const;

  // Assembles V(theta); symmetric by construction, positive definite for
  // valid theta. Throws NotPositiveDefinite for unstructured/Toeplitz
  // parameters whose assembled matrix is not PDS.
  Eigen::MatrixXd build(const Eigen::VectorXd& theta) const;

  // theta' with V(theta') = factor * V(theta), factor > 0.
  Eigen::VectorXd scale_params(const Eigen::VectorXd& theta, double factor) const;

  // Frobenius projection: parameters minimizing ||V(theta) - M||_F over the
  // valid domain. M only needs to be symmetric; variances are floored at
  // 1e-10 tr(M)/k so the result stays PDS. Throws DegenerateInput when
  // tr(M) <= 0.
  Eigen::VectorXd fit_from_matrix(const Eigen::MatrixXd& M) const;

 private:
  CovarianceStructure(CovKind kind, int k, int l) : kind_(kind), k_(k), l_(l) {}

  CovKind kind_;
  int k_;
  int l_;
  std::vector<Eigen::MatrixXd> designs_;
};

}  // namespace robustmm
