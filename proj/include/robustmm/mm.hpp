#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "robustmm/initial.hpp"
#include "robustmm/rho.hpp"
#include "robustmm/sample.hpp"

namespace robustmm {

struct MMConfig {
  double tol = 1e-10;        // step and relative-objective tolerance
  double score_tol = 1e-8;   // required score norm at convergence
  int max_iter = 500;
  int extra_starts = 20;     // additional elemental starts for bounded rho1
  std::uint64_t seed = 0;
};

struct MMFit {
  InitialFit initial;
  Eigen::VectorXd beta1;
  double objective = 0.0;          // R_n(beta1)
  std::vector<double> distances;   // d_i at (beta1, V0)
  std::vector<double> weights;     // u1(d_i)
  int iterations = 0;
  bool converged = false;
  int starts_used = 0;
  double score_norm = 0.0;
  std::vector<double> objective_trace;  // winning start, per IRLS iterate
};

// R_n(beta) = (1/n) sum rho1(d(s_i, beta, V0))
double objective_value(const BalancedSample& sample, const Eigen::VectorXd& beta,
                       const MahalanobisContext& ctx, const RhoFunction& rho1);

// (1/n) sum u1(d_i) X_i^T V0^{-1} (y_i - X_i beta); equals -grad R_n(beta).
Eigen::VectorXd score(const BalancedSample& sample, const Eigen::VectorXd& beta,
                      const MahalanobisContext& ctx, const RhoFunction& rho1);

enum class ExistenceCheck { OK, Pathological };

// Pathological iff R_n(0) >= sup rho1 - 1e-12: every observation sits outside
// the radius-c1 ellipsoid, so the objective cannot distinguish directions.
// Always OK for unbounded rho1.
ExistenceCheck existence_guard(const BalancedSample& sample, const MahalanobisContext& ctx,
                               const RhoFunction& rho1);

// Stage 2: minimize R_n by IRLS from beta0 (plus elemental restarts for
// bounded rho1). V0 stays fixed at the initial fit. Throws Pathological when
// the existence guard fails and SingularWeightedDesign when no start yields
// a solvable weighted system.
MMFit fit_mm(const BalancedSample& sample, const InitialFit& initial, const RhoFunction& rho1,
             const MMConfig& config);

}  // namespace robustmm
