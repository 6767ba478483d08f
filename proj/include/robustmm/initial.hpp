#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "robustmm/covariance.hpp"
#include "robustmm/rho.hpp"
#include "robustmm/sample.hpp"

namespace robustmm {

struct InitialConfig {
  int n_subsets = 500;
  int n_concentration = 10;
  std::uint64_t seed = 0;  // reproducibility is mandatory; set it explicitly
  double r0 = 0.5;         // breakdown target used by the pipeline helpers
};

// Stage-1 fit: (beta0, theta0) with V0 = V(theta0) satisfying the M-scale
// constraint (1/n) sum rho0(d_i) = b0 at unit scale.
struct InitialFit {
  Eigen::VectorXd beta0;
  Eigen::VectorXd theta0;
  Eigen::MatrixXd V0;
  double scale_constraint_residual = 0.0;
  int candidates_evaluated = 0;
  bool degenerate = false;      // exact-fit sample; V0 comes from the fallback rule
  std::string warning;
  std::vector<double> scale_trace;  // accepted M-scale per concentration step (winner)
};

// Unique s > 0 solving (1/n) sum rho0(d_i / s) = b0. rho0 must be bounded
// and b0 in (0, sup rho0). Throws DegenerateScale when so many distances are
// zero that no positive solution exists.
double mscale(const std::vector<double>& d, const RhoFunction& rho0, double b0);

// Subsampling + concentration surrogate for the stage-1 S-estimator: draws
// elemental subsets, refines each candidate by reweighted GLS and scatter
// projection steps, and keeps the candidate with the smallest M-scale.
InitialFit initial_fit(const BalancedSample& sample, const CovarianceStructure& structure,
                       const RhoFunction& rho0, double b0, const InitialConfig& config);

}  // namespace robustmm
