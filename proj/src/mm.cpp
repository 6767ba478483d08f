#include "robustmm/mm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "robustmm/errors.hpp"
#include "robustmm/rng.hpp"
#include "wls_internal.hpp"

namespace robustmm {
namespace {

std::vector<double> whitened_distances(const detail::WhitenedSample& w,
                                       const Eigen::VectorXd& beta) {
  std::vector<double> d(w.Xw.size());
  for (std::size_t i = 0; i < w.Xw.size(); ++i) d[i] = (w.yw[i] - w.Xw[i] * beta).norm();
  return d;
}

double mean_rho(const std::vector<double>& d, const RhoFunction& rho1) {
  double acc = 0.0;
  for (double di : d) acc += rho1.rho(di);
  return acc / static_cast<double>(d.size());
}

struct IrlsResult {
  Eigen::VectorXd beta;
  double objective = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool step_converged = false;
  std::vector<double> objective_trace;
};

// IRLS is a majorize-minimize iteration here (u1 nonincreasing), so the
// objective cannot go up; the 1e-12 guard only catches roundoff.
std::optional<IrlsResult> irls(const detail::WhitenedSample& w, const Eigen::VectorXd& start,
                               const RhoFunction& rho1, const MMConfig& config) {
  IrlsResult res;
  res.beta = start;
  std::vector<double> d = whitened_distances(w, res.beta);
  res.objective = mean_rho(d, rho1);
  res.objective_trace.push_back(res.objective);

  const int q = static_cast<int>(start.size());
  std::vector<double> wt(d.size());
  for (int it = 0; it < config.max_iter; ++it) {
    for (std::size_t i = 0; i < d.size(); ++i) wt[i] = rho1.weight(d[i]);
    const auto next = detail::weighted_gls(w, wt, q);
    if (!next) {
      if (it == 0) return std::nullopt;  // cannot even take one step
      break;                             // keep the previous iterate
    }
    const std::vector<double> d_next = whitened_distances(w, *next);
    const double obj_next = mean_rho(d_next, rho1);
    if (obj_next > res.objective + 1e-12) break;  // roundoff guard; keep previous

    const double step = (*next - res.beta).norm();
    const double obj_change = std::abs(obj_next - res.objective);
    const bool done = step <= config.tol * (1.0 + res.beta.norm()) &&
                      obj_change <= config.tol * std::max(1.0, res.objective);
    res.beta = *next;
    d = d_next;
    res.objective = obj_next;
    res.objective_trace.push_back(res.objective);
    res.iterations = it + 1;
    if (done) {
      res.step_converged = true;
      break;
    }
  }
  return res;
}

}  // namespace

double objective_value(const BalancedSample& sample, const Eigen::VectorXd& beta,
                       const MahalanobisContext& ctx, const RhoFunction& rho1) {
  return mean_rho(distances(sample, beta, ctx), rho1);
}

Eigen::VectorXd score(const BalancedSample& sample, const Eigen::VectorXd& beta,
                      const MahalanobisContext& ctx, const RhoFunction& rho1) {
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(sample.q);
  for (int i = 0; i < sample.n; ++i) {
    const Eigen::VectorXd r = sample.y[i] - sample.X[i] * beta;
    const double d = ctx.distance(r);
    acc.noalias() += rho1.weight(d) * sample.X[i].transpose() * (ctx.V_inv() * r);
  }
  return acc / sample.n;
}

ExistenceCheck existence_guard(const BalancedSample& sample, const MahalanobisContext& ctx,
                               const RhoFunction& rho1) {
  if (!rho1.bounded()) return ExistenceCheck::OK;
  const double r0 = objective_value(sample, Eigen::VectorXd::Zero(sample.q), ctx, rho1);
  return r0 >= rho1.sup() - 1e-12 ? ExistenceCheck::Pathological : ExistenceCheck::OK;
}

MMFit fit_mm(const BalancedSample& sample, const InitialFit& initial, const RhoFunction& rho1,
             const MMConfig& config) {
  // Per-subject designs may be column-rank deficient (multivariate regression
  // stacks x^T (x) I_k); estimability of the aggregate weighted system is
  // what matters here and is checked inside the IRLS solves.
  const MahalanobisContext ctx(initial.V0);
  if (existence_guard(sample, ctx, rho1) == ExistenceCheck::Pathological)
    throw Pathological("all observations fall outside the rho1 ellipsoid; R_n(0) >= sup rho1");

  const detail::WhitenedSample w = detail::whiten_sample(sample, ctx);
  const int q = sample.q, k = sample.k;

  std::vector<Eigen::VectorXd> starts{initial.beta0};
  if (rho1.bounded() && config.extra_starts > 0) {
    const int subset_size = std::min(sample.n, (q + k - 1) / k + 1);
    for (int j = 0; j < config.extra_starts; ++j) {
      Rng rng(derive_seed(config.seed, 0x5747ULL + j));
      const std::vector<int> idx = rng.sample_without_replacement(sample.n, subset_size);
      Eigen::MatrixXd Xs(subset_size * k, q);
      Eigen::VectorXd ys(subset_size * k);
      for (int t = 0; t < subset_size; ++t) {
        Xs.middleRows(t * k, k) = sample.X[idx[t]];
        ys.segment(t * k, k) = sample.y[idx[t]];
      }
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
      qr.setThreshold(1e-10);
      if (qr.rank() < q) continue;
      starts.push_back(qr.solve(ys));
    }
  }

  std::optional<IrlsResult> best;
  int starts_used = 0;
  for (const auto& start : starts) {
    auto res = irls(w, start, rho1, config);
    if (!res) continue;
    ++starts_used;
    if (!best) {
      best = std::move(res);
      continue;
    }
    const double tie = 1e-12 * std::max(1.0, best->objective);
    if (res->objective < best->objective - tie ||
        (std::abs(res->objective - best->objective) <= tie &&
         res->beta.norm() < best->beta.norm()))
      best = std::move(res);
  }
  if (!best) throw SingularWeightedDesign("all IRLS starts lost every observation weight");

  MMFit fit;
  fit.initial = initial;
  fit.beta1 = best->beta;
  fit.objective = best->objective;
  fit.iterations = best->iterations;
  fit.starts_used = starts_used;
  fit.objective_trace = std::move(best->objective_trace);
  fit.distances = distances(sample, fit.beta1, ctx);
  fit.weights.resize(sample.n);
  for (int i = 0; i < sample.n; ++i) fit.weights[i] = rho1.weight(fit.distances[i]);
  fit.score_norm = score(sample, fit.beta1, ctx, rho1).norm();
  fit.converged = best->step_converged && fit.score_norm <= config.score_tol;
  return fit;
}

}  // namespace robustmm
