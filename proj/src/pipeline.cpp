#include "robustmm/pipeline.hpp"

#include "robustmm/errors.hpp"

namespace robustmm {

ResolvedRho resolve_rho(const EstimatorConfig& config, int k) {
  const CalibrationResult stage0 = calibrate_breakdown(RhoKind::Biweight, k, config.r0);
  const RhoFunction rho0 = RhoFunction::biweight(stage0.cutoff);
  double c1 = config.rho1_cutoff;
  if (!(c1 > 0.0))
    c1 = calibrate_efficiency(config.rho1_kind, k, config.rho1_efficiency).cutoff;
  return ResolvedRho{rho0, RhoFunction(config.rho1_kind, c1), stage0.b0};
}

MMFit fit_pipeline(const BalancedSample& sample, const CovarianceStructure& structure,
                   const RhoFunction& rho0, double b0, const RhoFunction& rho1,
                   const InitialConfig& init_config, const MMConfig& mm_config,
                   bool enforce_pair) {
  if (enforce_pair && rho1.bounded() && !verify_mm_pair(rho0, rho1, 512))
    throw InvalidParams("rho pair violates rho1/a1 <= rho0/a0; increase the rho1 cut-off");
  const InitialFit init = initial_fit(sample, structure, rho0, b0, init_config);
  return fit_mm(sample, init, rho1, mm_config);
}

}  // namespace robustmm
