#pragma once

#include <Eigen/Dense>

#include "robustmm/calibration.hpp"
#include "robustmm/mm.hpp"

namespace robustmm {

struct AsymptoticReport {
  double alpha1 = 0.0;
  double lambda = 0.0;
  Eigen::MatrixXd info_matrix;      // (1/n) sum X_i^T V0^{-1} X_i
  Eigen::MatrixXd closed_form_cov;  // lambda * info_matrix^{-1}
  Eigen::MatrixXd sandwich_cov;     // D1^{-1} M D1^{-1}
  Eigen::MatrixXd D1_hat;           // empirical d(mean Psi1)/d(beta)
};

// alpha_1 radial constant for rho1 at dimension k (chi quadrature).
inline double alpha1(const RhoFunction& rho1, int k) { return alpha1_constant(rho1, k); }

// Asymptotic covariance of sqrt(n)(beta1 - beta): the elliptical closed form
// lambda * (E[X^T Sigma^-1 X])^-1 with empirical info matrix, and the
// empirical sandwich with analytic D1. Requires a converged fit.
AsymptoticReport asymptotic_covariance(const MMFit& fit, const BalancedSample& sample,
                                       const RhoFunction& rho1);

// IF(s0) = u1(d0)/alpha1 * info^-1 X0^T V0^{-1} (y0 - X0 beta1).
Eigen::VectorXd influence_function(const MMFit& fit, const AsymptoticReport& report,
                                   const Eigen::VectorXd& y0, const Eigen::MatrixXd& X0,
                                   const RhoFunction& rho1);

}  // namespace robustmm
