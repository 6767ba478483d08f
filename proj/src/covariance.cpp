#include "robustmm/covariance.hpp"

#include <cmath>

#include "robustmm/errors.hpp"

namespace robustmm {
namespace {

constexpr double kAR1RhoMax = 1.0 - 1e-8;  // keeps V nonsingular

Eigen::MatrixXd vech_to_sym(int k, const Eigen::VectorXd& v) {
  Eigen::MatrixXd M(k, k);
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) {
      M(i, j) = v[idx];
      M(j, i) = v[idx];
      ++idx;
    }
  return M;
}

Eigen::VectorXd sym_to_vech(const Eigen::MatrixXd& M) {
  const int k = static_cast<int>(M.rows());
  Eigen::VectorXd v(k * (k + 1) / 2);
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) v[idx++] = M(i, j);
  return v;
}

Eigen::MatrixXd ar1_profile(int k, double rho) {
  Eigen::MatrixXd A(k, k);
  for (int s = 0; s < k; ++s)
    for (int t = 0; t < k; ++t) A(s, t) = std::pow(rho, std::abs(s - t));
  return A;
}

double min_eigenvalue(const Eigen::MatrixXd& M) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

}  // namespace

CovarianceStructure CovarianceStructure::mixed_effects(int k,
                                                       std::vector<Eigen::MatrixXd> designs) {
  if (k < 1) throw InvalidParams("mixed_effects requires k >= 1");
  for (const auto& Z : designs)
    if (Z.rows() != k || Z.cols() < 1)
      throw InvalidParams("mixed_effects design matrices must be k x g_j");
  CovarianceStructure s(CovKind::MixedEffects, k, static_cast<int>(designs.size()) + 1);
  s.designs_ = std::move(designs);
  return s;
}

CovarianceStructure CovarianceStructure::unstructured(int k) {
  if (k < 1) throw InvalidParams("unstructured requires k >= 1");
  return {CovKind::Unstructured, k, k * (k + 1) / 2};
}

CovarianceStructure CovarianceStructure::ar1(int k) {
  // k = 1 would leave the autocorrelation unidentified
  if (k < 2) throw InvalidParams("ar1 requires k >= 2");
  return {CovKind::AR1, k, 2};
}

CovarianceStructure CovarianceStructure::toeplitz(int k) {
  if (k < 1) throw InvalidParams("toeplitz requires k >= 1");
  return {CovKind::Toeplitz, k, k};
}

void CovarianceStructure::validate(const Eigen::VectorXd& theta) const {
  if (theta.size() != l_) throw InvalidParams("theta has wrong length for this structure");
  if (!theta.allFinite()) throw InvalidParams("theta must be finite");
  switch (kind_) {
    case CovKind::MixedEffects:
      if (!(theta[0] > 0.0)) throw InvalidParams("sigma0^2 must be positive");
      for (int j = 1; j < l_; ++j)
        if (theta[j] < 0.0) throw InvalidParams("variance components must be nonnegative");
      break;
    case CovKind::AR1:
      if (!(theta[0] > 0.0)) throw InvalidParams("AR1 sigma^2 must be positive");
      if (std::abs(theta[1]) > kAR1RhoMax)
        throw InvalidParams("AR1 autocorrelation must satisfy |rho| <= 1 - 1e-8");
      break;
    case CovKind::Unstructured:
    case CovKind::Toeplitz:
      break;  // PDS is checked on the assembled matrix
  }
}

Eigen::MatrixXd CovarianceStructure::build(const Eigen::VectorXd& theta) const {
  validate(theta);
  Eigen::MatrixXd V;
  switch (kind_) {
    case CovKind::MixedEffects: {
      V = theta[0] * Eigen::MatrixXd::Identity(k_, k_);
      for (std::size_t j = 0; j < designs_.size(); ++j)
        V.noalias() += theta[j + 1] * designs_[j] * designs_[j].transpose();
      break;
    }
    case CovKind::Unstructured:
      V = vech_to_sym(k_, theta);
      break;
    case CovKind::AR1:
      V = theta[0] * ar1_profile(k_, theta[1]);
      break;
    case CovKind::Toeplitz: {
      V.resize(k_, k_);
      for (int s = 0; s < k_; ++s)
        for (int t = 0; t < k_; ++t) V(s, t) = theta[std::abs(s - t)];
      break;
    }
  }
  V = 0.5 * (V + V.transpose().eval());  // exact symmetry
  if (kind_ == CovKind::Unstructured || kind_ == CovKind::Toeplitz) {
    if (min_eigenvalue(V) <= 0.0)
      throw NotPositiveDefinite("assembled covariance matrix is not positive definite");
  }
  return V;
}

Eigen::VectorXd CovarianceStructure::scale_params(const Eigen::VectorXd& theta,
                                                  double factor) const {
  if (!(factor > 0.0)) throw InvalidParams("scale factor must be positive");
  Eigen::VectorXd out = theta;
  if (kind_ == CovKind::AR1)
    out[0] *= factor;  // rho is scale-free
  else
    out *= factor;
  return out;
}

Eigen::VectorXd CovarianceStructure::fit_from_matrix(const Eigen::MatrixXd& M) const {
  if (M.rows() != k_ || M.cols() != k_) throw InvalidParams("matrix has wrong dimension");
  const Eigen::MatrixXd S = 0.5 * (M + M.transpose());
  const double tr = S.trace();
  if (!(tr > 0.0)) throw DegenerateInput("matrix trace must be positive");
  const double floor = 1e-10 * tr / k_;

  switch (kind_) {
    case CovKind::Unstructured: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
      if (es.eigenvalues().minCoeff() >= floor) return sym_to_vech(S);
      const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(floor);
      return sym_to_vech(es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose());
    }
    case CovKind::MixedEffects: {
      const int r = l_ - 1;
      std::vector<Eigen::MatrixXd> basis;
      basis.push_back(Eigen::MatrixXd::Identity(k_, k_));
      for (const auto& Z : designs_) basis.push_back(Z * Z.transpose());
      Eigen::MatrixXd G(r + 1, r + 1);
      Eigen::VectorXd rhs(r + 1);
      for (int a = 0; a <= r; ++a) {
        rhs[a] = (basis[a].array() * S.array()).sum();
        for (int b = 0; b <= r; ++b) G(a, b) = (basis[a].array() * basis[b].array()).sum();
      }
      Eigen::VectorXd theta = G.ldlt().solve(rhs);
      theta[0] = std::max(theta[0], floor);
      for (int j = 1; j <= r; ++j) theta[j] = std::max(theta[j], 0.0);
      return theta;
    }
    case CovKind::Toeplitz: {
      // diagonal averaging is the orthogonal projection onto the Toeplitz span
      Eigen::VectorXd theta = Eigen::VectorXd::Zero(k_);
      for (int lag = 0; lag < k_; ++lag) {
        double acc = 0.0;
        for (int s = 0; s + lag < k_; ++s) acc += S(s + lag, s);
        theta[lag] = acc / (k_ - lag);
      }
      Eigen::MatrixXd V(k_, k_);
      for (int s = 0; s < k_; ++s)
        for (int t = 0; t < k_; ++t) V(s, t) = theta[std::abs(s - t)];
      const double lmin = min_eigenvalue(V);
      if (lmin < floor) theta[0] += floor - lmin;  // ridge on the main diagonal
      return theta;
    }
    case CovKind::AR1: {
      Eigen::MatrixXd A(k_, k_);
      const auto objective = [&](double rho) {
        for (int s = 0; s < k_; ++s)
          for (int t = 0; t < k_; ++t) A(s, t) = std::pow(rho, std::abs(s - t));
        const double num = (A.array() * S.array()).sum();
        const double den = (A.array() * A.array()).sum();
        const double sigma = std::max(num / den, floor);
        return (sigma * A - S).squaredNorm();
      };
      const auto profile_sigma = [&](double rho) {
        const Eigen::MatrixXd P = ar1_profile(k_, rho);
        const double num = (P.array() * S.array()).sum();
        const double den = (P.array() * P.array()).sum();
        return std::max(num / den, floor);
      };
      // coarse scan, then golden-section refinement around the best cell
      const int grid = 201;
      double best_rho = 0.0, best_obj = objective(0.0);
      for (int i = 0; i < grid; ++i) {
        const double rho = -kAR1RhoMax + 2.0 * kAR1RhoMax * i / (grid - 1);
        const double obj = objective(rho);
        if (obj < best_obj) {
          best_obj = obj;
          best_rho = rho;
        }
      }
      const double cell = 2.0 * kAR1RhoMax / (grid - 1);
      double a = std::max(-kAR1RhoMax, best_rho - cell);
      double b = std::min(kAR1RhoMax, best_rho + cell);
      const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
      double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
      double f1 = objective(x1), f2 = objective(x2);
      while (b - a > 1e-12) {
        if (f1 < f2) {
          b = x2;
          x2 = x1;
          f2 = f1;
          x1 = b - gr * (b - a);
          f1 = objective(x1);
        } else {
          a = x1;
          x1 = x2;
          f1 = f2;
          x2 = a + gr * (b - a);
          f2 = objective(x2);
        }
      }
      const double rho = 0.5 * (a + b);
      Eigen::VectorXd theta(2);
      theta[0] = profile_sigma(rho);
      theta[1] = rho;
      return theta;
    }
  }
  throw InvalidParams("unknown structure kind");
}

}  // namespace robustmm
