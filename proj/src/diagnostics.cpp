#include "robustmm/diagnostics.hpp"

#include <cmath>

#include "robustmm/errors.hpp"
#include "robustmm/radial.hpp"

namespace robustmm {
namespace {

enum class InvTarget { Info, D1 };

Eigen::MatrixXd invert_or_throw(const Eigen::MatrixXd& A, InvTarget target) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    if (target == InvTarget::Info) throw SingularInfo("information matrix is singular");
    throw SingularD1("empirical D1 is singular");
  }
  return lu.inverse();
}

}  // namespace

AsymptoticReport asymptotic_covariance(const MMFit& fit, const BalancedSample& sample,
                                       const RhoFunction& rho1) {
  if (!fit.converged) throw NotConverged("asymptotic covariance requires a converged fit");
  const int n = sample.n, k = sample.k, q = sample.q;
  const MahalanobisContext ctx(fit.initial.V0);

  AsymptoticReport rep;
  rep.alpha1 = alpha1_constant(rho1, k);
  rep.lambda = expected_radial([&](double r) { return rho1.psi(r) * rho1.psi(r); }, k,
                               {rho1.cutoff()}) /
               (k * rep.alpha1 * rep.alpha1);

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(q, q);
  Eigen::MatrixXd D1 = Eigen::MatrixXd::Zero(q, q);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd XtVinv = sample.X[i].transpose() * ctx.V_inv();  // q x k
    const Eigen::VectorXd r = sample.y[i] - sample.X[i] * fit.beta1;
    const double d = ctx.distance(r);
    const Eigen::VectorXd g = XtVinv * r;

    info.noalias() += XtVinv * sample.X[i];
    const Eigen::VectorXd psi1 = rho1.weight(d) * g;
    M.noalias() += psi1 * psi1.transpose();
    // d Psi1 / d beta = -(u1'(d)/d) g g^T - u1(d) X^T V^-1 X
    D1.noalias() -= rho1.weight_prime_over_s(d) * g * g.transpose();
    D1.noalias() -= rho1.weight(d) * XtVinv * sample.X[i];
  }
  info /= n;
  M /= n;
  D1 /= n;

  rep.info_matrix = info;
  rep.D1_hat = D1;
  rep.closed_form_cov = rep.lambda * invert_or_throw(info, InvTarget::Info);
  const Eigen::MatrixXd D1inv = invert_or_throw(D1, InvTarget::D1);
  rep.sandwich_cov = D1inv * M * D1inv.transpose();
  rep.sandwich_cov = 0.5 * (rep.sandwich_cov + rep.sandwich_cov.transpose().eval());
  return rep;
}

Eigen::VectorXd influence_function(const MMFit& fit, const AsymptoticReport& report,
                                   const Eigen::VectorXd& y0, const Eigen::MatrixXd& X0,
                                   const RhoFunction& rho1) {
  const MahalanobisContext ctx(fit.initial.V0);
  if (X0.rows() != ctx.k() || X0.cols() != fit.beta1.size())
    throw InvalidParams("contamination point has wrong dimensions");
  if (!(report.alpha1 > 0.0)) throw InvalidParams("alpha1 must be positive");
  const Eigen::VectorXd r = y0 - X0 * fit.beta1;
  const double d0 = ctx.distance(r);
  const Eigen::MatrixXd info_inv = invert_or_throw(report.info_matrix, InvTarget::Info);
  return (rho1.weight(d0) / report.alpha1) * info_inv *
         (X0.transpose() * (ctx.V_inv() * r));
}

}  // namespace robustmm
