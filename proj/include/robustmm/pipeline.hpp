#pragma once

#include "robustmm/calibration.hpp"
#include "robustmm/covariance.hpp"
#include "robustmm/mm.hpp"

namespace robustmm {

// Declarative tuning for the two-stage pipeline. rho0 is always biweight,
// calibrated at breakdown r0; rho1 comes from an efficiency target unless a
// cut-off is given directly.
struct EstimatorConfig {
  double r0 = 0.5;
  RhoKind rho1_kind = RhoKind::Biweight;
  double rho1_efficiency = 0.95;
  double rho1_cutoff = 0.0;  // > 0 overrides the efficiency target
  InitialConfig init;
  MMConfig mm;
};

struct ResolvedRho {
  RhoFunction rho0;
  RhoFunction rho1;
  double b0;  // E_Phi[rho0(||z||)] so the initial scale is Fisher-consistent
};

ResolvedRho resolve_rho(const EstimatorConfig& config, int k);

// initial_fit + existence guard + fit_mm. When rho1 is bounded the pair must
// satisfy rho1/a1 <= rho0/a0, otherwise the stage-2 breakdown guarantee is
// void; enforce_pair=false skips that check for deliberate experiments.
MMFit fit_pipeline(const BalancedSample& sample, const CovarianceStructure& structure,
                   const RhoFunction& rho0, double b0, const RhoFunction& rho1,
                   const InitialConfig& init_config, const MMConfig& mm_config,
                   bool enforce_pair = true);

}  // namespace robustmm
