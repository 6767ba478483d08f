#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <vector>

#include "robustmm/covariance.hpp"
#include "robustmm/pipeline.hpp"
#include "robustmm/sample.hpp"

namespace robustmm {

enum class DesignKind { FixedEqual, GaussianRandom, InterceptPlusNoise };
enum class ErrorLaw { Gaussian, StudentT };

// Elliptically contoured data generator: y_i = X_i beta + V(theta)^{1/2} z_i
// with z_i standard Gaussian or Student-t rescaled to unit covariance.
struct GeneratorSpec {
  explicit GeneratorSpec(CovarianceStructure s) : structure(std::move(s)) {}

  int n = 0, k = 0, q = 0;
  Eigen::VectorXd beta_true;
  CovarianceStructure structure;
  Eigen::VectorXd theta_true;
  DesignKind design = DesignKind::InterceptPlusNoise;
  Eigen::MatrixXd fixed_X;      // FixedEqual
  double design_mean = 0.0;     // GaussianRandom: iid N(mean, sd^2) entries
  double design_sd = 1.0;
  ErrorLaw error_law = ErrorLaw::Gaussian;
  double student_df = 5.0;      // must exceed 2 so the covariance exists
  std::uint64_t seed = 0;
};

BalancedSample generate(const GeneratorSpec& spec);

struct MonteCarloOptions {
  int replications = 100;
  std::vector<int> consistency_ns;  // e.g. {100, 400, 1600}; empty disables
  int consistency_reps = 0;
  int threads = 0;                  // 0 = hardware concurrency
  double max_failure_rate = 0.05;
  bool keep_replicates = false;     // retain per-replication estimates
};

struct ReplicateRecord {
  int rep = 0;
  bool ok = false;
  Eigen::VectorXd beta_mm;
  Eigen::VectorXd beta_gls;
};

struct MonteCarloReport {
  int replications = 0;
  int failures = 0;
  Eigen::VectorXd mean_beta_error;
  Eigen::MatrixXd empirical_cov_of_sqrt_n_error;
  Eigen::MatrixXd closed_form_cov;  // lambda * (E_hat[X^T Sigma^-1 X])^{-1}, true Sigma
  double efficiency_vs_gls = std::numeric_limits<double>::quiet_NaN();
  double coverage_95 = std::numeric_limits<double>::quiet_NaN();
  double consistency_slope = std::numeric_limits<double>::quiet_NaN();
  std::vector<ReplicateRecord> replicates;  // filled when keep_replicates
};

// Full-pipeline Monte Carlo: per-replication streams derived from
// (spec.seed, rep), parallel execution, deterministic index-order reduction.
// Throws when more than max_failure_rate of the replications fail.
MonteCarloReport run_monte_carlo(const GeneratorSpec& spec, const EstimatorConfig& estimator,
                                 const MonteCarloOptions& options);

}  // namespace robustmm
