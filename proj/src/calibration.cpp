#include "robustmm/calibration.hpp"

#include <cmath>
#include <functional>
#include <string>

#include "robustmm/errors.hpp"
#include "robustmm/radial.hpp"

namespace robustmm {
namespace {

constexpr double kCutoffFloor = 1e-3;
constexpr double kCutoffCeiling = 1e3;

double expected_rho(const RhoFunction& f, int k) {
  return expected_radial([&](double r) { return f.rho(r); }, k, {f.cutoff()});
}

double expected_psi_sq(const RhoFunction& f, int k) {
  return expected_radial([&](double r) { return f.psi(r) * f.psi(r); }, k, {f.cutoff()});
}

// Bisection for a scalar equation with monotone residual; `increasing`
// states the sign behavior of `res` in c.
double bisect_cutoff(const std::function<double(double)>& res, bool increasing,
                     const char* what) {
  const double sign = increasing ? 1.0 : -1.0;
  double lo = kCutoffFloor, hi = kCutoffCeiling;
  if (!(sign * res(lo) < 0.0 && sign * res(hi) > 0.0))
    throw NoBracket(std::string("no cutoff bracket for ") + what);
  // geometric bisection: the bracket spans six decades
  for (int it = 0; it < 200; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double rm = sign * res(mid);
    if (std::abs(rm) <= 1e-10 && hi - lo <= 1e-10 * mid) return mid;
    (rm < 0.0 ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

}  // namespace

double alpha1_constant(const RhoFunction& f, int k) {
  if (k < 1) throw InvalidParams("alpha1 requires k >= 1");
  const double inv_k = 1.0 / k;
  return expected_radial(
      [&](double r) { return (1.0 - inv_k) * f.weight(r) + inv_k * f.psi_prime(r); }, k,
      {f.cutoff()});
}

double lambda_constant(const RhoFunction& f, int k) {
  const double a1 = alpha1_constant(f, k);
  return expected_psi_sq(f, k) / (k * a1 * a1);
}

CalibrationResult calibration_summary(const RhoFunction& f, int k) {
  CalibrationResult out;
  out.family = f.kind();
  out.k = k;
  out.cutoff = f.cutoff();
  out.b0 = expected_rho(f, k);
  if (f.bounded()) out.r0 = out.b0 / f.sup();
  out.alpha1 = alpha1_constant(f, k);
  out.lambda = lambda_constant(f, k);
  out.efficiency = 1.0 / out.lambda;
  return out;
}

CalibrationResult calibrate_breakdown(RhoKind kind, int k, double r0) {
  if (kind != RhoKind::Biweight)
    throw NotBounded("breakdown calibration requires a bounded rho (biweight)");
  if (!(r0 > 0.0 && r0 <= 0.5)) throw InvalidParams("breakdown target must be in (0, 1/2]");
  // E[rho_B(.;c)]/(c^2/6) decreases from 1 to 0 in c, so the root is unique.
  const double c = bisect_cutoff(
      [&](double c) {
        const RhoFunction f = RhoFunction::biweight(c);
        return expected_rho(f, k) / f.sup() - r0;
      },
      /*increasing=*/false, "breakdown calibration");
  return calibration_summary(RhoFunction(kind, c), k);
}

CalibrationResult calibrate_efficiency(RhoKind kind, int k, double target_eff) {
  if (!(target_eff > 0.0 && target_eff < 1.0))
    throw InvalidParams("efficiency target must be in (0, 1)");
  const double c = bisect_cutoff(
      [&](double c) { return 1.0 / lambda_constant(RhoFunction(kind, c), k) - target_eff; },
      /*increasing=*/true, "efficiency calibration");
  return calibration_summary(RhoFunction(kind, c), k);
}

CalibrationResult calibrate_winsorize(RhoKind kind, int k, double w) {
  if (kind != RhoKind::Huber)
    throw InvalidParams("winsorizing calibration applies to the Huber family");
  if (!(w > 0.0 && w < 1.0)) throw InvalidParams("winsorizing proportion must be in (0, 1)");
  const double c = chi_quantile(k, 1.0 - w);
  return calibration_summary(RhoFunction(kind, c), k);
}

bool verify_mm_pair(const RhoFunction& rho0, const RhoFunction& rho1, int grid_points) {
  if (!rho0.bounded() || !rho1.bounded())
    throw NotBounded("verify_mm_pair requires two bounded rho functions");
  if (grid_points < 100) throw InvalidParams("verify_mm_pair needs at least 100 grid points");
  const double a0 = rho0.sup(), a1 = rho1.sup();
  const double upper = 2.0 * std::max(rho0.cutoff(), rho1.cutoff());
  const double lower = 1e-6 * upper;
  const double step = std::log(upper / lower) / (grid_points - 1);
  for (int i = 0; i < grid_points; ++i) {
    const double s = i == 0 ? 0.0 : lower * std::exp(step * (i - 1));
    if (rho1.rho(s) / a1 > rho0.rho(s) / a0 + 1e-12) return false;
  }
  return true;
}

}  // namespace robustmm
