#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "robustmm/covariance.hpp"
#include "robustmm/mm.hpp"
#include "robustmm/sample.hpp"

namespace robustmm {

// Finite-sample breakdown guarantee for the two-stage estimator:
//   eps*(beta1) >= min(eps*(V0), ceil(n r0)/n), valid when
//   r0 <= (n - kappa)/(2n).
struct BreakdownBound {
  int n = 0;
  double r0 = 0.0;
  int kappa = 0;
  bool kappa_exact = false;
  double v0_breakdown = 0.0;  // eps*(V0); ceil(n r0)/n for the stage-1 S-type fit
  double bound_beta = 0.0;    // min(v0_breakdown, ceil(n r0)/n)
  double bound_max = 0.0;     // floor((n - kappa + 1)/2)/n
  bool feasible = false;      // r0 <= (n - kappa)/(2n)
};

// v0_breakdown <= 0 selects the default ceil(n r0)/n.
BreakdownBound breakdown_bound(const BalancedSample& sample, double r0,
                               double v0_breakdown = 0.0, int kappa_max_exact_n = 30);

// dist(A, B) = max(|l_1(A) - l_1(B)|, |l_k(A)^-1 - l_k(B)^-1|): explosion of
// the top eigenvalue or implosion of the bottom one.
double covariance_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

enum class ContaminationMode { YShift, LeveragePoint, ExactFitPoint };

struct ContaminationScenario {
  int m = 0;  // number of replaced subjects, 0 <= m < n
  ContaminationMode mode = ContaminationMode::YShift;
  double magnitude = 1e6;
  Eigen::VectorXd direction;  // YShift; defaults to the all-ones vector
  Eigen::VectorXd beta_star;  // ExactFitPoint
  std::uint64_t seed = 0;     // selects which subjects get replaced
};

BalancedSample contaminate(const BalancedSample& sample, const ContaminationScenario& scenario);

struct SweepRow {
  double m_over_n = 0.0;
  double magnitude = 0.0;
  double beta_dev = 0.0;  // ||beta1(S'_m) - beta1(S_n)||
  double v_dist = 0.0;    // dist(V0(S'_m), V0(S_n))
  bool exploded = false;
  std::string error;  // per-row fit failure, recorded instead of thrown
};

struct SweepConfig {
  std::vector<double> magnitudes{1e2, 1e4, 1e6};
  ContaminationMode mode = ContaminationMode::YShift;
  Eigen::VectorXd beta_star;  // ExactFitPoint target
  std::uint64_t seed = 1;
  InitialConfig init;
  MMConfig mm;
};

// Refits the full pipeline for each contamination fraction and escalating
// magnitude. A row is flagged exploded when its beta deviation grew by 10x or
// more over the previous magnitude. This is an empirical lower-bound probe,
// not an exact breakdown computation.
std::vector<SweepRow> contamination_sweep(const BalancedSample& sample,
                                          const CovarianceStructure& structure,
                                          const RhoFunction& rho0, double b0,
                                          const RhoFunction& rho1,
                                          const std::vector<double>& m_over_n_grid,
                                          const SweepConfig& config);

}  // namespace robustmm
