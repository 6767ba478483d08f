#include "robustmm/breakdown.hpp"

#include <algorithm>
#include <cmath>

#include "robustmm/errors.hpp"
#include "robustmm/rng.hpp"

namespace robustmm {

BreakdownBound breakdown_bound(const BalancedSample& sample, double r0, double v0_breakdown,
                               int kappa_max_exact_n) {
  if (!(r0 > 0.0 && r0 <= 0.5)) throw InvalidParams("r0 must be in (0, 1/2]");
  const KappaResult kr = kappa(sample, kappa_max_exact_n);
  BreakdownBound b;
  b.n = sample.n;
  b.r0 = r0;
  b.kappa = kr.value;
  b.kappa_exact = kr.exact;
  const double n = sample.n;
  const double stage1 = std::ceil(n * r0) / n;
  b.v0_breakdown = v0_breakdown > 0.0 ? v0_breakdown : stage1;
  b.bound_beta = std::min(b.v0_breakdown, stage1);
  b.bound_max = std::floor((n - kr.value + 1) / 2.0) / n;
  b.feasible = r0 <= (n - kr.value) / (2.0 * n);
  return b;
}

double covariance_dist(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(A, Eigen::EigenvaluesOnly);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(B, Eigen::EigenvaluesOnly);
  const double top = std::abs(ea.eigenvalues().maxCoeff() - eb.eigenvalues().maxCoeff());
  const double bottom =
      std::abs(1.0 / ea.eigenvalues().minCoeff() - 1.0 / eb.eigenvalues().minCoeff());
  return std::max(top, bottom);
}

BalancedSample contaminate(const BalancedSample& sample, const ContaminationScenario& scenario) {
  if (scenario.m < 0 || scenario.m >= sample.n)
    throw InvalidParams("contamination count must satisfy 0 <= m < n");
  BalancedSample out = sample;
  if (scenario.m == 0) return out;

  Rng rng(derive_seed(scenario.seed, 0xC0417ULL));
  const std::vector<int> idx = rng.sample_without_replacement(sample.n, scenario.m);

  Eigen::VectorXd dir = scenario.direction;
  if (dir.size() == 0) dir = Eigen::VectorXd::Ones(sample.k);
  for (int i : idx) {
    switch (scenario.mode) {
      case ContaminationMode::YShift:
        out.y[i] += scenario.magnitude * dir;
        break;
      case ContaminationMode::LeveragePoint:
        out.X[i] *= scenario.magnitude;
        out.y[i] *= scenario.magnitude;
        break;
      case ContaminationMode::ExactFitPoint:
        if (scenario.beta_star.size() != sample.q)
          throw InvalidParams("ExactFitPoint needs beta_star of length q");
        out.y[i] = out.X[i] * scenario.beta_star;
        break;
    }
  }
  compute_rank_flags(out);
  return out;
}

std::vector<SweepRow> contamination_sweep(const BalancedSample& sample,
                                          const CovarianceStructure& structure,
                                          const RhoFunction& rho0, double b0,
                                          const RhoFunction& rho1,
                                          const std::vector<double>& m_over_n_grid,
                                          const SweepConfig& config) {
  // clean baseline; failures here are real errors, not rows
  const InitialFit clean_init = initial_fit(sample, structure, rho0, b0, config.init);
  MMConfig mm_cfg = config.mm;
  mm_cfg.seed = derive_seed(config.seed, 0xBA5EULL);
  const MMFit clean = fit_mm(sample, clean_init, rho1, mm_cfg);
  const double dev_floor = 1e-8 * (1.0 + clean.beta1.norm());

  std::vector<SweepRow> rows;
  for (double frac : m_over_n_grid) {
    const int m = static_cast<int>(std::lround(frac * sample.n));
    double prev_dev = -1.0;
    for (double magnitude : config.magnitudes) {
      SweepRow row;
      row.m_over_n = static_cast<double>(m) / sample.n;
      row.magnitude = magnitude;
      try {
        ContaminationScenario sc;
        sc.m = m;
        sc.mode = config.mode;
        sc.magnitude = magnitude;
        sc.beta_star = config.beta_star;
        sc.seed = derive_seed(config.seed, static_cast<std::uint64_t>(m));
        const BalancedSample dirty = contaminate(sample, sc);
        const InitialFit init = initial_fit(dirty, structure, rho0, b0, config.init);
        const MMFit fit = fit_mm(dirty, init, rho1, mm_cfg);
        row.beta_dev = (fit.beta1 - clean.beta1).norm();
        row.v_dist = covariance_dist(init.V0, clean_init.V0);
        if (prev_dev >= 0.0)
          row.exploded = row.beta_dev >= 10.0 * std::max(prev_dev, dev_floor);
        prev_dev = row.beta_dev;
      } catch (const Error& e) {
        row.error = e.what();
        row.exploded = true;  // a failed refit counts as broken down
        prev_dev = -1.0;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

}  // namespace robustmm
