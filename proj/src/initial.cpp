#include "robustmm/initial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "robustmm/errors.hpp"
#include "robustmm/rng.hpp"

namespace robustmm {
namespace {

double mean_rho(const std::vector<double>& d, const RhoFunction& rho0, double s) {
  double acc = 0.0;
  for (double di : d) acc += rho0.rho(di / s);
  return acc / static_cast<double>(d.size());
}

// Candidates are compared through the M-scale of distances under a
// det-normalized V; otherwise inflating V would shrink the scale for free.
struct Candidate {
  Eigen::VectorXd beta;
  Eigen::VectorXd theta;  // normalized: det V(theta) = 1
  double scale = std::numeric_limits<double>::infinity();
  bool degenerate = false;
  std::vector<double> scale_trace;
};

std::optional<Eigen::VectorXd> normalize_theta(const CovarianceStructure& structure,
                                               const Eigen::VectorXd& theta) {
  try {
    const double det = structure.build(theta).determinant();
    if (!(det > 0.0) || !std::isfinite(det)) return std::nullopt;
    return structure.scale_params(theta, std::pow(det, -1.0 / structure.k()));
  } catch (const Error&) {
    return std::nullopt;
  }
}

// Scratch space reused across concentration steps; the loops below run per
// candidate per step over the whole sample, so per-subject allocations
// dominate otherwise.
struct Workspace {
  std::vector<double> d;
  std::vector<double> w;
  Eigen::VectorXd resid;   // k
  Eigen::VectorXd white;   // k
  Eigen::MatrixXd xtvinv;  // q x k
  Eigen::MatrixXd A;       // q x q
  Eigen::VectorXd b;       // q
  Eigen::MatrixXd Sw;      // k x k

  Workspace(int n, int k, int q)
      : d(n), w(n), resid(k), white(k), xtvinv(q, k), A(q, q), b(q), Sw(k, k) {}
};

// distances of every subject under (beta, ctx) into ws.d
void fill_distances(const BalancedSample& sample, const Eigen::VectorXd& beta,
                    const MahalanobisContext& ctx, Workspace& ws) {
  for (int i = 0; i < sample.n; ++i) {
    ws.resid = sample.y[i];
    ws.resid.noalias() -= sample.X[i] * beta;
    ws.white.noalias() = ctx.L().transpose() * ws.resid;
    ws.d[i] = ws.white.norm();
  }
}

// Reweighted GLS + scatter-projection steps, keeping the best (smallest
// normalized M-scale) iterate. Stops when a step fails, stops improving, or
// would increase the scale.
void concentrate(Candidate& cand, const BalancedSample& sample,
                 const CovarianceStructure& structure, const RhoFunction& rho0, double b0,
                 int max_steps, double scale_floor, double rel_tol, Workspace& ws) {
  const int n = sample.n, q = sample.q;
  Eigen::VectorXd beta = cand.beta;
  Eigen::VectorXd theta = cand.theta;
  bool accepted_any = std::isfinite(cand.scale);

  for (int step = 0; step <= max_steps; ++step) {
    double s = 0.0;
    try {
      const MahalanobisContext ctx(structure.build(theta));
      fill_distances(sample, beta, ctx, ws);
      try {
        s = mscale(ws.d, rho0, b0);
        if (s < scale_floor) s = 0.0;
      } catch (const DegenerateScale&) {
        s = 0.0;
      }
    } catch (const Error&) {
      break;
    }
    if (s == 0.0) {
      cand.beta = beta;
      cand.theta = theta;
      cand.scale = 0.0;
      cand.degenerate = true;
      cand.scale_trace.push_back(0.0);
      return;
    }
    if (accepted_any && s > cand.scale + 1e-9 * std::max(1.0, cand.scale)) break;
    const bool improved = !accepted_any || s < cand.scale * (1.0 - rel_tol);
    if (!accepted_any || s <= cand.scale) {
      cand.beta = beta;
      cand.theta = theta;
      cand.scale = s;
      accepted_any = true;
    }
    cand.scale_trace.push_back(s);
    if (step == max_steps || !improved) break;

    double wsum = 0.0;
    for (int i = 0; i < n; ++i) {
      ws.w[i] = rho0.weight(ws.d[i] / s);
      wsum += ws.w[i];
    }
    if (!(wsum > 0.0)) break;

    // weighted GLS accumulation with V(theta)^{-1} applied directly
    const MahalanobisContext ctx(structure.build(theta));
    ws.A.setZero();
    ws.b.setZero();
    for (int i = 0; i < n; ++i) {
      if (!(ws.w[i] > 0.0)) continue;
      ws.xtvinv.noalias() = sample.X[i].transpose() * ctx.V_inv();
      ws.A.noalias() += ws.w[i] * ws.xtvinv * sample.X[i];
      ws.b.noalias() += ws.w[i] * ws.xtvinv * sample.y[i];
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(ws.A);
    if (ldlt.info() != Eigen::Success) break;
    const double dmax = ldlt.vectorD().maxCoeff();
    if (!(dmax > 0.0) || ldlt.vectorD().minCoeff() < 1e-13 * dmax) break;
    const Eigen::VectorXd beta_new = ldlt.solve(ws.b);

    ws.Sw.setZero();
    for (int i = 0; i < n; ++i) {
      if (!(ws.w[i] > 0.0)) continue;
      ws.resid = sample.y[i];
      ws.resid.noalias() -= sample.X[i] * beta_new;
      ws.Sw.noalias() += ws.w[i] * ws.resid * ws.resid.transpose();
    }
    ws.Sw /= wsum;
    Eigen::VectorXd theta_raw;
    try {
      theta_raw = structure.fit_from_matrix(ws.Sw);
    } catch (const Error&) {
      break;
    }
    const auto theta_norm = normalize_theta(structure, theta_raw);
    if (!theta_norm) break;
    theta = *theta_norm;
    beta = beta_new;
  }
}

std::optional<Candidate> run_candidate(const BalancedSample& sample,
                                       const CovarianceStructure& structure,
                                       const RhoFunction& rho0, double b0,
                                       const InitialConfig& config, int subset_size,
                                       double scale_floor, std::uint64_t candidate_seed,
                                       Workspace& ws) {
  const int k = sample.k, q = sample.q;
  Rng rng(candidate_seed);
  const std::vector<int> idx = rng.sample_without_replacement(sample.n, subset_size);

  // elemental least squares fit on the subset
  Eigen::MatrixXd Xs(subset_size * k, q);
  Eigen::VectorXd ys(subset_size * k);
  for (int j = 0; j < subset_size; ++j) {
    Xs.middleRows(j * k, k) = sample.X[idx[j]];
    ys.segment(j * k, k) = sample.y[idx[j]];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  qr.setThreshold(1e-10);
  if (qr.rank() < q) return std::nullopt;

  Candidate cand;
  cand.beta = qr.solve(ys);

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(k, k);
  for (int j = 0; j < subset_size; ++j) {
    const Eigen::VectorXd r = sample.y[idx[j]] - sample.X[idx[j]] * cand.beta;
    scatter.noalias() += r * r.transpose();
  }
  scatter /= subset_size;

  std::optional<Eigen::VectorXd> theta;
  try {
    theta = normalize_theta(structure, structure.fit_from_matrix(scatter));
  } catch (const Error&) {
    return std::nullopt;
  }
  if (!theta) return std::nullopt;
  cand.theta = *theta;

  concentrate(cand, sample, structure, rho0, b0, config.n_concentration, scale_floor, 0.0, ws);
  if (!std::isfinite(cand.scale)) return std::nullopt;
  return cand;
}

}  // namespace

double mscale(const std::vector<double>& d, const RhoFunction& rho0, double b0) {
  if (!rho0.bounded()) throw NotBounded("mscale requires a bounded rho0");
  const double a0 = rho0.sup();
  if (!(b0 > 0.0 && b0 < a0)) throw InvalidParams("b0 must lie in (0, sup rho0)");
  if (d.empty()) throw InvalidParams("mscale needs at least one distance");

  const double n = static_cast<double>(d.size());
  double min_pos = std::numeric_limits<double>::infinity();
  double max_d = 0.0;
  int n_pos = 0;
  for (double di : d) {
    if (!(di >= 0.0) || !std::isfinite(di)) throw InvalidParams("distances must be finite");
    if (di > 0.0) {
      ++n_pos;
      min_pos = std::min(min_pos, di);
      max_d = std::max(max_d, di);
    }
  }
  // with too many exact zeros the equation has no positive solution
  if (!(n_pos * a0 > n * b0)) throw DegenerateScale("too many zero distances for the M-scale");

  double lo = min_pos / rho0.cutoff();  // plateau: mean rho = n_pos a0 / n > b0
  double hi = std::max(max_d, lo * 2.0);
  double ghi = mean_rho(d, rho0, hi) - b0;
  for (int guard = 0; ghi > 0.0 && guard < 2000; ++guard) {
    lo = hi;
    hi *= 2.0;
    ghi = mean_rho(d, rho0, hi) - b0;
  }
  double glo = mean_rho(d, rho0, lo) - b0;  // >= 0, residual decreasing in s
  if (glo <= 0.0) return lo;

  // Illinois iteration on the monotone residual, bisection as a safeguard
  const double res_tol = 1e-13 * std::max(1.0, b0);
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    double prop = (it % 4 == 3) ? 0.5 * (lo + hi) : lo + glo * (hi - lo) / (glo - ghi);
    if (!(prop > lo && prop < hi)) prop = 0.5 * (lo + hi);
    mid = prop;
    const double g = mean_rho(d, rho0, mid) - b0;
    if (std::abs(g) <= res_tol || hi - lo <= 1e-13 * mid) break;
    if (g > 0.0) {
      lo = mid;
      glo = g;
      ghi *= 0.5;  // Illinois trick: decay the retained endpoint
    } else {
      hi = mid;
      ghi = g;
      glo *= 0.5;
    }
  }
  return mid;
}

InitialFit initial_fit(const BalancedSample& sample, const CovarianceStructure& structure,
                       const RhoFunction& rho0, double b0, const InitialConfig& config) {
  const int n = sample.n, k = sample.k, q = sample.q, l = structure.param_dim();
  if (structure.k() != k) throw InvalidParams("structure dimension does not match the sample");
  if (!sample.all_full_rank()) throw RankDeficient("every X_i must have full column rank");
  if (n * k <= q + l) throw InvalidParams("sample too small: need n k > q + l");
  if (config.n_subsets < 1 || config.n_concentration < 0)
    throw InvalidParams("invalid subsampling configuration");

  const int subset_size = std::min(n, (q + l + k - 1) / k + 1);

  double y_scale_sq = 0.0;
  for (const auto& yi : sample.y) y_scale_sq += yi.squaredNorm();
  y_scale_sq /= n * k;
  // distances below this resolution are exact fits, not small scales
  const double scale_floor = 1e-9 * std::sqrt(std::max(y_scale_sq, 1e-300));

  Workspace ws(n, k, q);
  Candidate best;
  bool have_best = false;
  int evaluated = 0;
  for (int j = 0; j < config.n_subsets; ++j) {
    auto cand = run_candidate(sample, structure, rho0, b0, config, subset_size, scale_floor,
                              derive_seed(config.seed, static_cast<std::uint64_t>(j)), ws);
    if (!cand) continue;
    ++evaluated;
    if (!have_best) {
      best = std::move(*cand);
      have_best = true;
      continue;
    }
    const double tie = 1e-12 * std::max(1.0, best.scale);
    if (cand->scale < best.scale - tie ||
        (std::abs(cand->scale - best.scale) <= tie && cand->beta.norm() < best.beta.norm()))
      best = std::move(*cand);
  }
  if (!have_best) throw AllCandidatesSingular("no elemental subset produced a usable candidate");

  // refine the winner to (near) convergence of the S-scale
  if (!best.degenerate)
    concentrate(best, sample, structure, rho0, b0, 300, scale_floor, 1e-11, ws);

  InitialFit fit;
  fit.beta0 = best.beta;
  fit.candidates_evaluated = evaluated;
  fit.degenerate = best.degenerate;
  fit.scale_trace = best.scale_trace;

  if (best.degenerate) {
    // exact-fit fallback: the constraint cannot hold with all distances zero
    const double level = std::max(1e-8 * y_scale_sq, 1e-30);
    fit.theta0 = structure.fit_from_matrix(level * Eigen::MatrixXd::Identity(k, k));
    fit.V0 = structure.build(fit.theta0);
    fit.warning = "degenerate scale: sample admits an exact fit; V0 set by the fallback rule";
    const MahalanobisContext ctx(fit.V0);
    fit.scale_constraint_residual =
        std::abs(mean_rho(distances(sample, fit.beta0, ctx), rho0, 1.0) - b0);
    return fit;
  }

  fit.theta0 = structure.scale_params(best.theta, best.scale * best.scale);
  // polish: squeeze the constraint residual below 1e-10
  for (int pass = 0; pass < 3; ++pass) {
    fit.V0 = structure.build(fit.theta0);
    const MahalanobisContext ctx(fit.V0);
    const std::vector<double> d = distances(sample, fit.beta0, ctx);
    fit.scale_constraint_residual = std::abs(mean_rho(d, rho0, 1.0) - b0);
    if (fit.scale_constraint_residual <= 1e-10) break;
    const double s = mscale(d, rho0, b0);
    fit.theta0 = structure.scale_params(fit.theta0, s * s);
  }
  return fit;
}

}  // namespace robustmm
