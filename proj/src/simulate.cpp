#include "robustmm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "robustmm/diagnostics.hpp"
#include "robustmm/errors.hpp"
#include "robustmm/parallel.hpp"
#include "robustmm/rng.hpp"
#include "wls_internal.hpp"

namespace robustmm {
namespace {

void validate_spec(const GeneratorSpec& spec) {
  if (spec.n < 1 || spec.k < 1 || spec.q < 1) throw InvalidParams("n, k, q must be positive");
  if (spec.structure.k() != spec.k) throw InvalidParams("structure dimension mismatch");
  if (spec.beta_true.size() != spec.q) throw InvalidParams("beta_true must have length q");
  spec.structure.validate(spec.theta_true);
  if (spec.design == DesignKind::FixedEqual &&
      (spec.fixed_X.rows() != spec.k || spec.fixed_X.cols() != spec.q))
    throw InvalidParams("fixed_X must be k x q");
  if (spec.error_law == ErrorLaw::StudentT && !(spec.student_df > 2.0))
    throw InvalidParams("Student-t errors need df > 2 for a finite covariance");
}

struct ReplicationOutcome {
  bool ok = false;
  Eigen::VectorXd beta_mm;
  Eigen::VectorXd beta_gls;
  Eigen::VectorXd sandwich_diag;
};

}  // namespace

BalancedSample generate(const GeneratorSpec& spec) {
  validate_spec(spec);
  const Eigen::MatrixXd V = spec.structure.build(spec.theta_true);
  const Eigen::MatrixXd Vhalf = Eigen::LLT<Eigen::MatrixXd>(V).matrixL();
  // unit-covariance rescaling for the t law
  const double t_scale = spec.error_law == ErrorLaw::StudentT
                             ? std::sqrt((spec.student_df - 2.0) / spec.student_df)
                             : 1.0;

  Rng rng(derive_seed(spec.seed, 0x6E11ULL));
  BalancedSample s;
  s.n = spec.n;
  s.k = spec.k;
  s.q = spec.q;
  s.y.reserve(spec.n);
  s.X.reserve(spec.n);
  for (int i = 0; i < spec.n; ++i) {
    Eigen::MatrixXd X(spec.k, spec.q);
    switch (spec.design) {
      case DesignKind::FixedEqual:
        X = spec.fixed_X;
        break;
      case DesignKind::GaussianRandom:
        for (int r = 0; r < spec.k; ++r)
          for (int c = 0; c < spec.q; ++c)
            X(r, c) = spec.design_mean + spec.design_sd * rng.normal();
        break;
      case DesignKind::InterceptPlusNoise:
        X.col(0).setOnes();
        for (int r = 0; r < spec.k; ++r)
          for (int c = 1; c < spec.q; ++c) X(r, c) = rng.normal();
        break;
    }
    Eigen::VectorXd z(spec.k);
    for (int r = 0; r < spec.k; ++r) z[r] = rng.normal();
    if (spec.error_law == ErrorLaw::StudentT) {
      const double wchi = rng.chisq(spec.student_df) / spec.student_df;
      z *= t_scale / std::sqrt(wchi);
    }
    s.y.push_back(X * spec.beta_true + Vhalf * z);
    s.X.push_back(std::move(X));
  }
  compute_rank_flags(s);
  return s;
}

namespace {

ReplicationOutcome run_replication(const GeneratorSpec& base, const ResolvedRho& rho,
                                   const EstimatorConfig& est,
                                   const MahalanobisContext& true_ctx, std::uint64_t rep) {
  ReplicationOutcome out;
  try {
    GeneratorSpec spec = base;
    spec.seed = derive_seed(base.seed, 0xDA7AULL + rep);
    const BalancedSample sample = generate(spec);

    InitialConfig init = est.init;
    init.seed = derive_seed(base.seed, 0x141EULL + rep);
    MMConfig mm = est.mm;
    mm.seed = derive_seed(base.seed, 0x3141ULL + rep);

    const InitialFit ifit = initial_fit(sample, spec.structure, rho.rho0, rho.b0, init);
    const MMFit fit = fit_mm(sample, ifit, rho.rho1, mm);
    if (!fit.converged) return out;

    const AsymptoticReport rep_cov = asymptotic_covariance(fit, sample, rho.rho1);
    out.beta_mm = fit.beta1;
    out.sandwich_diag = rep_cov.sandwich_cov.diagonal();

    // GLS with the true covariance is the efficiency baseline
    const detail::WhitenedSample w = detail::whiten_sample(sample, true_ctx);
    const std::vector<double> ones(sample.n, 1.0);
    const auto gls = detail::weighted_gls(w, ones, sample.q);
    if (!gls) return out;
    out.beta_gls = *gls;
    out.ok = true;
  } catch (const Error&) {
    out.ok = false;
  }
  return out;
}

double rmse_at_n(const GeneratorSpec& base, const ResolvedRho& rho, const EstimatorConfig& est,
                 int n, int reps, int threads) {
  GeneratorSpec spec = base;
  spec.n = n;
  std::vector<double> sq(reps, std::numeric_limits<double>::quiet_NaN());
  parallel_for(
      reps,
      [&](int r) {
        try {
          GeneratorSpec srep = spec;
          srep.seed = derive_seed(base.seed, 0xCE11ULL + 131 * n + r);
          const BalancedSample sample = generate(srep);
          InitialConfig init = est.init;
          init.seed = derive_seed(base.seed, 0xF00DULL + 131 * n + r);
          MMConfig mm = est.mm;
          mm.seed = derive_seed(base.seed, 0xBEEFULL + 131 * n + r);
          const InitialFit ifit = initial_fit(sample, srep.structure, rho.rho0, rho.b0, init);
          const MMFit fit = fit_mm(sample, ifit, rho.rho1, mm);
          sq[r] = (fit.beta1 - base.beta_true).squaredNorm();
        } catch (const Error&) {
        }
      },
      threads);
  double acc = 0.0;
  int good = 0;
  for (double v : sq)
    if (std::isfinite(v)) {
      acc += v;
      ++good;
    }
  if (good == 0) throw Error("all consistency replications failed");
  return std::sqrt(acc / good);
}

}  // namespace

MonteCarloReport run_monte_carlo(const GeneratorSpec& spec, const EstimatorConfig& estimator,
                                 const MonteCarloOptions& options) {
  validate_spec(spec);
  if (options.replications < 1) throw InvalidParams("need at least one replication");
  const ResolvedRho rho = resolve_rho(estimator, spec.k);
  if (rho.rho1.bounded() && !verify_mm_pair(rho.rho0, rho.rho1, 512))
    throw InvalidParams("rho pair violates rho1/a1 <= rho0/a0");
  const MahalanobisContext true_ctx(spec.structure.build(spec.theta_true));

  const int R = options.replications;
  std::vector<ReplicationOutcome> outcomes(R);
  parallel_for(
      R, [&](int r) { outcomes[r] = run_replication(spec, rho, estimator, true_ctx, r); },
      options.threads);

  MonteCarloReport report;
  report.replications = R;
  const int q = spec.q;
  Eigen::VectorXd mean_mm = Eigen::VectorXd::Zero(q);
  Eigen::VectorXd mean_gls = Eigen::VectorXd::Zero(q);
  int good = 0;
  for (const auto& o : outcomes)
    if (o.ok) {
      mean_mm += o.beta_mm - spec.beta_true;
      mean_gls += o.beta_gls - spec.beta_true;
      ++good;
    }
  report.failures = R - good;
  if (static_cast<double>(report.failures) > options.max_failure_rate * R)
    throw Error("monte carlo failure rate exceeded " +
                std::to_string(options.max_failure_rate));
  mean_mm /= good;
  mean_gls /= good;
  report.mean_beta_error = mean_mm;

  Eigen::MatrixXd cov_mm = Eigen::MatrixXd::Zero(q, q);
  Eigen::MatrixXd cov_gls = Eigen::MatrixXd::Zero(q, q);
  double coverage = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    const Eigen::VectorXd e_mm = o.beta_mm - spec.beta_true - mean_mm;
    const Eigen::VectorXd e_gls = o.beta_gls - spec.beta_true - mean_gls;
    cov_mm.noalias() += e_mm * e_mm.transpose();
    cov_gls.noalias() += e_gls * e_gls.transpose();
    for (int j = 0; j < q; ++j) {
      const double half = 1.959963984540054 * std::sqrt(o.sandwich_diag[j] / spec.n);
      if (std::abs(o.beta_mm[j] - spec.beta_true[j]) <= half) coverage += 1.0;
    }
  }
  const double denom = std::max(good - 1, 1);
  report.empirical_cov_of_sqrt_n_error = cov_mm * (spec.n / denom);
  report.coverage_95 = coverage / (static_cast<double>(good) * q);
  report.efficiency_vs_gls = cov_gls.trace() / cov_mm.trace();

  if (options.keep_replicates) {
    report.replicates.reserve(R);
    for (int r = 0; r < R; ++r) {
      ReplicateRecord rec;
      rec.rep = r;
      rec.ok = outcomes[r].ok;
      if (rec.ok) {
        rec.beta_mm = outcomes[r].beta_mm;
        rec.beta_gls = outcomes[r].beta_gls;
      }
      report.replicates.push_back(std::move(rec));
    }
  }

  // closed form with the true Sigma; info averaged over the same replicates
  {
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(q, q);
    int used = 0;
    for (int r = 0; r < std::min(R, 64); ++r) {
      GeneratorSpec srep = spec;
      srep.seed = derive_seed(spec.seed, 0xDA7AULL + r);
      const BalancedSample sample = generate(srep);
      for (int i = 0; i < sample.n; ++i)
        info.noalias() += sample.X[i].transpose() * true_ctx.V_inv() * sample.X[i];
      used += sample.n;
    }
    info /= used;
    report.closed_form_cov = lambda_constant(rho.rho1, spec.k) * info.inverse();
  }

  if (!options.consistency_ns.empty() && options.consistency_reps > 0) {
    std::vector<double> lx, ly;
    for (int n : options.consistency_ns) {
      lx.push_back(std::log(static_cast<double>(n)));
      ly.push_back(std::log(
          rmse_at_n(spec, rho, estimator, n, options.consistency_reps, options.threads)));
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / lx.size();
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / ly.size();
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    report.consistency_slope = sxy / sxx;
  }
  return report;
}

}  // namespace robustmm
