#pragma once

#include <limits>

#include "robustmm/rho.hpp"

namespace robustmm {

// Tuning summary for a rho-function at dimension k. For biweight,
// r0 = b0/a0 is the breakdown fraction implied by the M-scale constraint;
// for Huber r0 is reported as NaN (a0 is infinite).
struct CalibrationResult {
  RhoKind family = RhoKind::Biweight;
  int k = 1;
  double cutoff = 0.0;
  double b0 = 0.0;      // E_Phi[rho(||z||)]
  double r0 = std::numeric_limits<double>::quiet_NaN();
  double alpha1 = 0.0;
  double lambda = 0.0;
  double efficiency = 0.0;  // 1/lambda
};

// alpha_1 = E_{0,I_k}[(1 - 1/k) rho'(||z||)/||z|| + (1/k) rho''(||z||)]
double alpha1_constant(const RhoFunction& f, int k);

// lambda = E_{0,I_k}[rho'(||z||)^2] / (k alpha_1^2); 1/lambda is the
// asymptotic efficiency relative to GLS at the Gaussian model.
double lambda_constant(const RhoFunction& f, int k);

CalibrationResult calibration_summary(const RhoFunction& f, int k);

// Solves E_Phi[rho_B(||z||; c)] / (c^2/6) = r0 for c. Biweight only.
CalibrationResult calibrate_breakdown(RhoKind kind, int k, double r0);

// Solves 1/lambda(c) = target_eff for c, target_eff in (0,1).
CalibrationResult calibrate_efficiency(RhoKind kind, int k, double target_eff);

// Huber cut-off from the winsorizing proportion: P_Phi(||z|| > c) = w.
CalibrationResult calibrate_winsorize(RhoKind kind, int k, double w);

// Checks the stage-coupling inequality rho1(s)/a1 <= rho0(s)/a0 on a
// log-spaced grid over [0, 2 max(c0, c1)]. Both functions must be bounded.
bool verify_mm_pair(const RhoFunction& rho0, const RhoFunction& rho1, int grid_points);

}  // namespace robustmm
