#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace robustmm {

// Balanced sample: n subjects, each with a response y_i in R^k and a known
// design X_i in R^{k x q}.
struct BalancedSample {
  int n = 0;
  int k = 0;
  int q = 0;
  std::vector<Eigen::VectorXd> y;
  std::vector<Eigen::MatrixXd> X;
  std::vector<bool> full_rank;  // rank(X_i) == q, per subject

  bool all_full_rank() const {
    for (bool f : full_rank)
      if (!f) return false;
    return true;
  }
};

// Long-format CSV with header exactly `subject,row,y,x1,...,xq`. Every
// subject must contribute exactly k rows labeled 1..k; subjects are kept in
// order of first appearance. Throws ParseError / Unbalanced.
BalancedSample load_csv(const std::string& path);

void compute_rank_flags(BalancedSample& sample);

// Cached factorization of a fixed V0: L lower triangular with L L^T = V0^{-1}.
// Construction enforces positive definiteness and a condition-number ceiling,
// beyond which Mahalanobis distances are meaningless.
class MahalanobisContext {
 public:
  explicit MahalanobisContext(const Eigen::MatrixXd& V0, double cond_ceiling = 1e12);

  const Eigen::MatrixXd& V() const noexcept { return V_; }
  const Eigen::MatrixXd& V_inv() const noexcept { return V_inv_; }
  const Eigen::MatrixXd& L() const noexcept { return L_; }
  double logdet() const noexcept { return logdet_; }
  int k() const noexcept { return static_cast<int>(V_.rows()); }

  // d(s, beta, V) = ||L^T (y - X beta)||
  double distance(const Eigen::VectorXd& residual) const {
    return (L_.transpose() * residual).norm();
  }

  // L^T A, the whitening map: whitened residuals have Euclidean geometry
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& A) const { return L_.transpose() * A; }

 private:
  Eigen::MatrixXd V_, V_inv_, L_;
  double logdet_ = 0.0;
};

std::vector<double> distances(const BalancedSample& sample, const Eigen::VectorXd& beta,
                              const MahalanobisContext& ctx);

// Dimension p of the affine span of the flattened designs vec(X_i); singular
// values below 1e-9 of the largest are treated as zero.
int design_span_dim(const BalancedSample& sample);

struct KappaResult {
  int value = 0;   // max number of sample points on a common hyperplane
  bool exact = false;
  int p = 0;       // affine dimension of the design span
};

// kappa(S_n) over hyperplanes of R^k x Xspace. Exact enumeration when
// n <= max_exact_n and k + p <= 6, otherwise the general-position value k+p.
KappaResult kappa(const BalancedSample& sample, int max_exact_n = 30);

}  // namespace robustmm
