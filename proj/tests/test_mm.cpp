#include <doctest.h>

#include <cmath>

#include "robustmm/errors.hpp"
#include "robustmm/mm.hpp"
#include "robustmm/pipeline.hpp"
#include "robustmm/rng.hpp"
#include "robustmm/simulate.hpp"
#include "support/oracles.hpp"

using robustmm::BalancedSample;
using robustmm::CovarianceStructure;
using robustmm::GeneratorSpec;
using robustmm::InitialFit;
using robustmm::MahalanobisContext;
using robustmm::MMConfig;
using robustmm::MMFit;
using robustmm::RhoFunction;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GeneratorSpec small_spec(int n, int k, int q, std::uint64_t seed) {
  GeneratorSpec spec(CovarianceStructure::unstructured(k));
  spec.n = n;
  spec.k = k;
  spec.q = q;
  spec.beta_true = VectorXd::LinSpaced(q, -1.0, 1.0);
  MatrixXd B = MatrixXd::Identity(k, k);
  B(0, k - 1) = 0.4;
  const MatrixXd V = B * B.transpose();
  VectorXd vech(k * (k + 1) / 2);
  int idx = 0;
  for (int j = 0; j < k; ++j)
    for (int i = j; i < k; ++i) vech[idx++] = V(i, j);
  spec.theta_true = vech;
  spec.design = robustmm::DesignKind::GaussianRandom;
  spec.seed = seed;
  return spec;
}

// InitialFit with a hand-picked V0 so stage 2 is testable in isolation
InitialFit manual_initial(const VectorXd& beta0, const MatrixXd& V0) {
  InitialFit init;
  init.beta0 = beta0;
  init.V0 = V0;
  init.theta0 = VectorXd();
  return init;
}

VectorXd gls_solution(const BalancedSample& s, const MahalanobisContext& ctx) {
  MatrixXd A = MatrixXd::Zero(s.q, s.q);
  VectorXd b = VectorXd::Zero(s.q);
  for (int i = 0; i < s.n; ++i) {
    A += s.X[i].transpose() * ctx.V_inv() * s.X[i];
    b += s.X[i].transpose() * ctx.V_inv() * s.y[i];
  }
  return A.ldlt().solve(b);
}

}  // namespace

TEST_SUITE("mm") {

TEST_CASE("objective examples") {
  const GeneratorSpec spec = small_spec(12, 2, 2, 3);
  const BalancedSample s = robustmm::generate(spec);
  const MahalanobisContext ctx(spec.structure.build(spec.theta_true));
  const RhoFunction rho1 = RhoFunction::biweight(4.0);

  // exact fit of a 1-subject sample gives 0
  BalancedSample one;
  one.n = 1;
  one.k = 2;
  one.q = 2;
  one.X = {MatrixXd::Identity(2, 2)};
  one.y = {(VectorXd(2) << 0.4, -0.9).finished()};
  robustmm::compute_rank_flags(one);
  CHECK(robustmm::objective_value(one, one.y[0], MahalanobisContext(MatrixXd::Identity(2, 2)),
                                  rho1) == 0.0);

  // plateau: every distance beyond the cut-off
  BalancedSample far = s;
  for (auto& y : far.y) y.array() += 1e6;
  CHECK(robustmm::objective_value(far, VectorXd::Zero(2), ctx, rho1) ==
        doctest::Approx(rho1.sup()).epsilon(1e-14));

  // direct per-term summation oracle
  robustmm::Rng rng(51);
  VectorXd beta(2);
  beta << rng.normal(), rng.normal();
  double acc = 0.0;
  for (int i = 0; i < s.n; ++i) {
    const VectorXd r = s.y[i] - s.X[i] * beta;
    acc += rho1.rho(std::sqrt(r.dot(ctx.V_inv() * r)));
  }
  CHECK(robustmm::objective_value(s, beta, ctx, rho1) ==
        doctest::Approx(acc / s.n).epsilon(1e-14));
}

TEST_CASE("existence guard") {
  const GeneratorSpec spec = small_spec(30, 2, 2, 5);
  const BalancedSample s = robustmm::generate(spec);
  const MahalanobisContext ctx(spec.structure.build(spec.theta_true));
  const RhoFunction rho1 = RhoFunction::biweight(4.0);
  CHECK(robustmm::existence_guard(s, ctx, rho1) == robustmm::ExistenceCheck::OK);

  BalancedSample shifted = s;
  for (auto& y : shifted.y) y.array() += 1e9;
  CHECK(robustmm::existence_guard(shifted, MahalanobisContext(MatrixXd::Identity(2, 2)), rho1) ==
        robustmm::ExistenceCheck::Pathological);
  CHECK(robustmm::existence_guard(shifted, ctx, RhoFunction::huber(1.5)) ==
        robustmm::ExistenceCheck::OK);

  CHECK_THROWS_AS(robustmm::fit_mm(shifted,
                                   manual_initial(VectorXd::Zero(2), MatrixXd::Identity(2, 2)),
                                   rho1, MMConfig{}),
                  robustmm::Pathological);
}

TEST_CASE("huber with a huge cut-off reproduces GLS") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u}) {
    const GeneratorSpec spec = small_spec(25, 2, 3, seed);
    const BalancedSample s = robustmm::generate(spec);
    const MatrixXd V0 = spec.structure.build(spec.theta_true);
    const MMFit fit =
        robustmm::fit_mm(s, manual_initial(VectorXd::Zero(3), V0), RhoFunction::huber(1e6),
                         MMConfig{});
    const VectorXd gls = gls_solution(s, MahalanobisContext(V0));
    CHECK((fit.beta1 - gls).norm() <= 1e-8 * (1.0 + gls.norm()));
    CHECK(fit.converged);
  }
}

TEST_CASE("single subject with identity design interpolates") {
  BalancedSample one;
  one.n = 1;
  one.k = 3;
  one.q = 3;
  one.X = {MatrixXd::Identity(3, 3)};
  one.y = {(VectorXd(3) << 1.0, -2.0, 0.5).finished()};
  robustmm::compute_rank_flags(one);
  MatrixXd V0 = MatrixXd::Identity(3, 3) * 2.0;
  const MMFit fit = robustmm::fit_mm(one, manual_initial(VectorXd::Zero(3), V0),
                                     RhoFunction::huber(2.0), MMConfig{});
  CHECK((fit.beta1 - one.y[0]).norm() <= 1e-10);
  CHECK(fit.objective <= 1e-20);
}

TEST_CASE("score is the negated gradient of the objective") {
  robustmm::Rng seeds(52);
  for (int trial = 0; trial < 12; ++trial) {
    const int k = 1 + seeds.below(3);
    const int q = 1 + seeds.below(3);
    const GeneratorSpec spec = small_spec(15, k, q, 100 + trial);
    const BalancedSample s = robustmm::generate(spec);
    const MahalanobisContext ctx(spec.structure.build(spec.theta_true));
    const RhoFunction rho1 =
        trial % 2 == 0 ? RhoFunction::biweight(3.0) : RhoFunction::huber(1.5);

    VectorXd beta(q);
    for (int j = 0; j < q; ++j) beta[j] = 0.5 * seeds.normal();
    const VectorXd grad = oracles::numeric_gradient(
        [&](const VectorXd& b) { return robustmm::objective_value(s, b, ctx, rho1); }, beta);
    const VectorXd sc = robustmm::score(s, beta, ctx, rho1);
    CHECK((sc + grad).norm() <= 1e-5 * std::max(1.0, grad.norm()));
  }
}

TEST_CASE("score vanishes at a point of symmetry") {
  // paired responses +v/-v around the origin with identity designs
  BalancedSample s;
  s.n = 6;
  s.k = 2;
  s.q = 2;
  robustmm::Rng rng(53);
  for (int i = 0; i < 3; ++i) {
    VectorXd v(2);
    v << rng.normal(), rng.normal();
    s.y.push_back(v);
    s.y.push_back(-v);
    s.X.push_back(MatrixXd::Identity(2, 2));
    s.X.push_back(MatrixXd::Identity(2, 2));
  }
  robustmm::compute_rank_flags(s);
  const MahalanobisContext ctx(MatrixXd::Identity(2, 2));
  for (const auto& rho1 : {RhoFunction::biweight(2.0), RhoFunction::huber(1.0)})
    CHECK(robustmm::score(s, VectorXd::Zero(2), ctx, rho1).norm() <= 1e-14);
}

TEST_CASE("IRLS objective never increases and converged fits have small score") {
  robustmm::Rng seeds(54);
  int checked = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 1 + seeds.below(3);
    const int q = 1 + seeds.below(3);
    const GeneratorSpec spec = small_spec(20 + seeds.below(20), k, q, 200 + trial);
    const BalancedSample s = robustmm::generate(spec);
    const MatrixXd V0 = spec.structure.build(spec.theta_true);
    const RhoFunction rho1 =
        trial % 2 == 0 ? RhoFunction::biweight(2.0 + k) : RhoFunction::huber(1.3);
    MMConfig cfg;
    cfg.seed = trial;
    cfg.extra_starts = 5;
    const MMFit fit = robustmm::fit_mm(s, manual_initial(VectorXd::Zero(q), V0), rho1, cfg);
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t)
      CHECK(fit.objective_trace[t] <= fit.objective_trace[t - 1] + 1e-12);
    if (fit.converged) {
      CHECK(fit.score_norm <= 1e-8);
      ++checked;
    }
    CHECK(fit.objective <=
          robustmm::objective_value(s, VectorXd::Zero(q), MahalanobisContext(V0), rho1) + 1e-12);
  }
  CHECK(checked > 30);  // convergence should be the norm on clean data
}

TEST_CASE("huber fits are unique: all starts agree") {
  const GeneratorSpec spec = small_spec(40, 2, 3, 777);
  const BalancedSample s = robustmm::generate(spec);
  const MatrixXd V0 = spec.structure.build(spec.theta_true);
  const RhoFunction rho1 = RhoFunction::huber(20.0);  // all residuals inside the corner
  robustmm::Rng rng(55);
  VectorXd ref;
  for (int start = 0; start < 20; ++start) {
    VectorXd b0(3);
    for (int j = 0; j < 3; ++j) b0[j] = 3.0 * rng.normal();
    MMConfig cfg;
    cfg.extra_starts = 0;
    const MMFit fit = robustmm::fit_mm(s, manual_initial(b0, V0), rho1, cfg);
    if (start == 0)
      ref = fit.beta1;
    else
      CHECK((fit.beta1 - ref).norm() <= 1e-6);
  }
}

TEST_CASE("full pipeline is regression equivariant under a fixed seed") {
  GeneratorSpec spec(CovarianceStructure::ar1(2));
  spec.n = 80;
  spec.k = 2;
  spec.q = 2;
  spec.beta_true = (VectorXd(2) << 0.5, 1.5).finished();
  spec.theta_true = (VectorXd(2) << 1.0, 0.4).finished();
  spec.seed = 99;
  const BalancedSample s = robustmm::generate(spec);

  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  const RhoFunction rho1 = RhoFunction::biweight(5.1229860899);
  robustmm::InitialConfig init;
  init.n_subsets = 40;
  init.seed = 12;
  MMConfig mm;
  mm.seed = 12;
  const MMFit base = robustmm::fit_pipeline(s, spec.structure, rho0, 0.5 * rho0.sup(), rho1,
                                            init, mm);

  robustmm::Rng rng(56);
  for (int rep = 0; rep < 5; ++rep) {
    VectorXd b(2);
    b << rng.normal(), rng.normal();
    BalancedSample shifted = s;
    for (int i = 0; i < s.n; ++i) shifted.y[i] += shifted.X[i] * b;
    const MMFit moved = robustmm::fit_pipeline(shifted, spec.structure, rho0, 0.5 * rho0.sup(),
                                               rho1, init, mm);
    CHECK((moved.beta1 - base.beta1 - b).norm() <= 1e-9 * (1.0 + base.beta1.norm()));
  }
}

TEST_CASE("pipeline rejects a dominated rho pair") {
  GeneratorSpec spec = small_spec(30, 2, 2, 5);
  const BalancedSample s = robustmm::generate(spec);
  robustmm::InitialConfig init;
  init.seed = 4;
  CHECK_THROWS_AS(robustmm::fit_pipeline(s, spec.structure, RhoFunction::biweight(4.0), 0.2,
                                         RhoFunction::biweight(2.0), init, MMConfig{}),
                  robustmm::InvalidParams);
}

}  // TEST_SUITE
