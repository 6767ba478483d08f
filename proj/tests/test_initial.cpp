#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "robustmm/calibration.hpp"
#include "robustmm/errors.hpp"
#include "robustmm/initial.hpp"
#include "robustmm/radial.hpp"
#include "robustmm/rng.hpp"
#include "robustmm/simulate.hpp"

using robustmm::BalancedSample;
using robustmm::CovarianceStructure;
using robustmm::GeneratorSpec;
using robustmm::InitialConfig;
using robustmm::InitialFit;
using robustmm::RhoFunction;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GeneratorSpec ar1_spec(int n, std::uint64_t seed) {
  GeneratorSpec spec(CovarianceStructure::ar1(2));
  spec.n = n;
  spec.k = 2;
  spec.q = 2;
  spec.beta_true = (VectorXd(2) << 1.0, -0.5).finished();
  spec.theta_true = (VectorXd(2) << 1.0, 0.5).finished();
  spec.design = robustmm::DesignKind::InterceptPlusNoise;
  spec.seed = seed;
  return spec;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

}  // namespace

TEST_SUITE("initial") {

TEST_CASE("mscale on constant distances") {
  const RhoFunction rho0 = RhoFunction::biweight(1.5476449809);
  const double b0 = 0.1 * rho0.sup();
  const double dstar = 3.7;
  const std::vector<double> d(20, dstar);
  // rho0(d*/s) = b0  =>  s = d*/rho0^{-1}(b0)
  CHECK(robustmm::mscale(d, rho0, b0) ==
        doctest::Approx(dstar / rho0.rho_inv(b0)).epsilon(1e-10));
}

TEST_CASE("mscale degenerate cases") {
  const RhoFunction rho0 = RhoFunction::biweight(2.0);
  const double b0 = 0.5 * rho0.sup();
  CHECK_THROWS_AS(robustmm::mscale(std::vector<double>(10, 0.0), rho0, b0),
                  robustmm::DegenerateScale);
  // 6 of 10 zeros: n_pos a0 = 4 a0 < 10 b0 = 5 a0
  std::vector<double> mostly_zero(10, 0.0);
  for (int i = 0; i < 4; ++i) mostly_zero[i] = 1.0;
  CHECK_THROWS_AS(robustmm::mscale(mostly_zero, rho0, b0), robustmm::DegenerateScale);
  // 4 of 10 zeros: solvable
  std::vector<double> enough(10, 1.0);
  for (int i = 0; i < 4; ++i) enough[i] = 0.0;
  CHECK(robustmm::mscale(enough, rho0, b0) > 0.0);

  CHECK_THROWS_AS(robustmm::mscale({1.0}, RhoFunction::huber(2.0), 0.1), robustmm::NotBounded);
  CHECK_THROWS_AS(robustmm::mscale({1.0}, rho0, rho0.sup() * 2.0), robustmm::InvalidParams);
}

TEST_CASE("mscale is scale equivariant") {
  robustmm::Rng rng(41);
  const RhoFunction rho0 = RhoFunction::biweight(1.5476449809);
  const double b0 = 0.5 * rho0.sup();
  std::vector<double> d(50);
  for (auto& v : d) v = std::abs(rng.normal()) + 0.01;
  const double s1 = robustmm::mscale(d, rho0, b0);
  for (double c : {0.1, 3.0, 1e4}) {
    std::vector<double> dc = d;
    for (auto& v : dc) v *= c;
    CHECK(robustmm::mscale(dc, rho0, b0) == doctest::Approx(c * s1).epsilon(1e-10));
  }
}

TEST_CASE("mscale is Fisher consistent at the chi law") {
  // d ~ chi_2 and b0 = E[rho0(||z||)] should give s near 1
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  const double b0 = robustmm::expected_radial([&](double r) { return rho0.rho(r); }, 2,
                                              {rho0.cutoff()});
  robustmm::Rng rng(42);
  std::vector<double> d(10000);
  for (auto& v : d) v = std::sqrt(rng.chisq(2.0));
  CHECK(robustmm::mscale(d, rho0, b0) == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("initial_fit recovers clean AR1 data") {
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);  // 50% breakdown at k=2
  const double b0 = 0.5 * rho0.sup();

  InitialConfig cfg;
  cfg.n_subsets = 30;
  cfg.n_concentration = 5;

  // oracle scale for the beta error: S-estimator variance is lambda(rho0)/n
  // times the GLS covariance trace
  const double lam0 = robustmm::lambda_constant(rho0, 2);

  std::vector<double> beta_err, rho_err;
  for (int rep = 0; rep < 200; ++rep) {
    GeneratorSpec spec = ar1_spec(200, 1000 + rep);
    const BalancedSample s = robustmm::generate(spec);
    cfg.seed = 77 + rep;
    const InitialFit fit = robustmm::initial_fit(s, spec.structure, rho0, b0, cfg);
    CHECK(fit.scale_constraint_residual <= 1e-10);
    beta_err.push_back((fit.beta0 - spec.beta_true).norm());
    rho_err.push_back(std::abs(fit.theta0[1] - 0.5));

    // monotone concentration trace
    for (std::size_t t = 1; t < fit.scale_trace.size(); ++t)
      CHECK(fit.scale_trace[t] <= fit.scale_trace[t - 1] +
                                      1e-9 * std::max(1.0, fit.scale_trace[t - 1]));
  }
  // rough GLS-trace oracle: info ~ E[X'V^-1 X] with intercept-plus-noise design
  const double se_scale = std::sqrt(lam0 * 2.0 / 200.0);
  CHECK(median(beta_err) < 3.0 * se_scale);
  CHECK(median(rho_err) < 0.1);
}

TEST_CASE("initial_fit constraint holds exactly on one draw") {
  GeneratorSpec spec = ar1_spec(120, 7);
  const BalancedSample s = robustmm::generate(spec);
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  const double b0 = 0.5 * rho0.sup();
  InitialConfig cfg;
  cfg.n_subsets = 60;
  cfg.seed = 3;
  const InitialFit fit = robustmm::initial_fit(s, spec.structure, rho0, b0, cfg);

  const robustmm::MahalanobisContext ctx(fit.V0);
  const auto d = robustmm::distances(s, fit.beta0, ctx);
  double acc = 0.0;
  for (double di : d) acc += rho0.rho(di);
  CHECK(std::abs(acc / s.n - b0) <= 1e-10);
  CHECK(fit.candidates_evaluated > 0);
}

TEST_CASE("initial_fit is regression equivariant for a fixed seed") {
  GeneratorSpec spec = ar1_spec(100, 11);
  const BalancedSample s = robustmm::generate(spec);
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  const double b0 = 0.5 * rho0.sup();
  InitialConfig cfg;
  cfg.n_subsets = 40;
  cfg.seed = 5;

  const InitialFit base = robustmm::initial_fit(s, spec.structure, rho0, b0, cfg);

  robustmm::Rng rng(43);
  VectorXd shift(2);
  shift << rng.normal(), rng.normal();
  BalancedSample shifted = s;
  for (int i = 0; i < s.n; ++i) shifted.y[i] += shifted.X[i] * shift;
  const InitialFit moved = robustmm::initial_fit(shifted, spec.structure, rho0, b0, cfg);

  CHECK((moved.beta0 - base.beta0 - shift).norm() <= 1e-9 * (1.0 + base.beta0.norm()));
  CHECK((moved.V0 - base.V0).norm() <= 1e-9 * base.V0.norm());
}

TEST_CASE("initial_fit survives 20% contamination") {
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  const double b0 = 0.5 * rho0.sup();
  InitialConfig cfg;
  cfg.n_subsets = 80;
  cfg.n_concentration = 8;

  std::vector<double> clean_err, dirty_err;
  for (int rep = 0; rep < 20; ++rep) {
    GeneratorSpec spec = ar1_spec(100, 500 + rep);
    const BalancedSample s = robustmm::generate(spec);
    cfg.seed = 900 + rep;
    const InitialFit clean = robustmm::initial_fit(s, spec.structure, rho0, b0, cfg);
    clean_err.push_back((clean.beta0 - spec.beta_true).norm());

    BalancedSample dirty = s;
    for (int i = 0; i < 20; ++i) dirty.y[i].array() += 1e6;
    const InitialFit fit = robustmm::initial_fit(dirty, spec.structure, rho0, b0, cfg);
    dirty_err.push_back((fit.beta0 - spec.beta_true).norm());
  }
  CHECK(median(dirty_err) < 10.0 * median(clean_err));
}

TEST_CASE("initial_fit handles an exact-fit sample") {
  robustmm::Rng rng(44);
  BalancedSample s;
  s.n = 20;
  s.k = 2;
  s.q = 2;
  VectorXd beta_star(2);
  beta_star << 0.8, -1.1;
  for (int i = 0; i < s.n; ++i) {
    MatrixXd X(2, 2);
    X << 1.0, rng.normal(), 1.0, rng.normal();
    s.X.push_back(X);
    s.y.push_back(X * beta_star);
  }
  robustmm::compute_rank_flags(s);

  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  InitialConfig cfg;
  cfg.n_subsets = 30;
  cfg.seed = 1;
  const InitialFit fit =
      robustmm::initial_fit(s, CovarianceStructure::unstructured(2), rho0, 0.5 * rho0.sup(), cfg);
  CHECK(fit.degenerate);
  CHECK_FALSE(fit.warning.empty());
  CHECK((fit.beta0 - beta_star).norm() <= 1e-8);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(fit.V0, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("initial_fit preconditions") {
  GeneratorSpec spec = ar1_spec(30, 13);
  BalancedSample s = robustmm::generate(spec);
  const RhoFunction rho0 = RhoFunction::biweight(2.6608033929);
  InitialConfig cfg;
  cfg.seed = 1;

  s.X[4].col(1) = s.X[4].col(0);  // rank-deficient subject
  robustmm::compute_rank_flags(s);
  CHECK_THROWS_AS(robustmm::initial_fit(s, spec.structure, rho0, 0.2, cfg),
                  robustmm::RankDeficient);

  BalancedSample tiny;
  tiny.n = 2;
  tiny.k = 1;
  tiny.q = 1;
  tiny.y = {VectorXd::Ones(1), VectorXd::Zero(1)};
  tiny.X = {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)};
  robustmm::compute_rank_flags(tiny);
  CHECK_THROWS_AS(robustmm::initial_fit(tiny, CovarianceStructure::unstructured(1),
                                        RhoFunction::biweight(1.5476), 0.19, cfg),
                  robustmm::InvalidParams);  // n k <= q + l
}

}  // TEST_SUITE
