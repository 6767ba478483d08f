#include <doctest.h>

#include <cmath>

#include "robustmm/calibration.hpp"
#include "robustmm/errors.hpp"
#include "robustmm/radial.hpp"
#include "support/oracles.hpp"

using robustmm::CalibrationResult;
using robustmm::RhoFunction;
using robustmm::RhoKind;

TEST_SUITE("calibration") {

TEST_CASE("expected_radial basics") {
  CHECK(robustmm::expected_radial([](double r) { return r * r; }, 3) ==
        doctest::Approx(3.0).epsilon(1e-10));  // E||z||^2 = k
  for (int k : {1, 2, 5})
    CHECK(robustmm::expected_radial([](double) { return 1.0; }, k) ==
          doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("expected_radial agrees with Monte Carlo for rho, psi^2, psi''") {
  const RhoFunction f = RhoFunction::biweight(2.2);
  const int k = 2;
  const std::vector<std::function<double(double)>> gs = {
      [&](double r) { return f.rho(r); },
      [&](double r) { return f.psi(r) * f.psi(r); },
      [&](double r) { return f.psi_prime(r); }};
  for (std::size_t i = 0; i < gs.size(); ++i) {
    const auto [mc, se] = oracles::mc_radial(gs[i], k, 1000000, 42 + i);
    const double quad = robustmm::expected_radial(gs[i], k, {f.cutoff()});
    CHECK(std::abs(quad - mc) <= 3.0 * se);
  }
}

TEST_CASE("expected_radial rejects a non-integrable g") {
  CHECK_THROWS_AS(robustmm::expected_radial([](double r) { return std::exp(r * r); }, 2),
                  robustmm::NonIntegrable);
}

TEST_CASE("breakdown calibration fixed points") {
  // constants derived by an independent quadrature + root-finder oracle
  const CalibrationResult c1 = robustmm::calibrate_breakdown(RhoKind::Biweight, 1, 0.5);
  CHECK(c1.cutoff == doctest::Approx(1.5476449809).epsilon(1e-8));
  const CalibrationResult c2 = robustmm::calibrate_breakdown(RhoKind::Biweight, 2, 0.5);
  CHECK(c2.cutoff == doctest::Approx(2.6608033929).epsilon(1e-8));

  // 50%-breakdown fixed point: E[rho_B]/a0 = 1/2, cross-checked by MC
  const RhoFunction f = RhoFunction::biweight(c1.cutoff);
  const auto [mc, se] =
      oracles::mc_radial([&](double r) { return f.rho(r); }, 1, 2000000, 99);
  CHECK(std::abs(mc / f.sup() - 0.5) <= 3.0 * se / f.sup());
}

TEST_CASE("breakdown calibration roundtrip and monotonicity") {
  double prev_c = 1e9;
  for (double r0 : {0.15, 0.25, 0.35, 0.5}) {
    const CalibrationResult c = robustmm::calibrate_breakdown(RhoKind::Biweight, 2, r0);
    CHECK(c.r0 == doctest::Approx(r0).epsilon(1e-8));  // inverse consistency
    CHECK(c.cutoff < prev_c);                          // larger r0, smaller c
    prev_c = c.cutoff;
    CHECK(c.b0 == doctest::Approx(r0 * c.cutoff * c.cutoff / 6.0).epsilon(1e-8));
  }
  CHECK_THROWS_AS(robustmm::calibrate_breakdown(RhoKind::Huber, 2, 0.5), robustmm::NotBounded);
  CHECK_THROWS_AS(robustmm::calibrate_breakdown(RhoKind::Biweight, 2, 0.7),
                  robustmm::InvalidParams);
}

TEST_CASE("efficiency calibration matches the oracle constants") {
  // biweight cut-offs from the independent oracle, k x efficiency grid
  const double expected[3][3] = {{3.13690866, 3.88266158, 4.68506495},
                                 {3.51006415, 4.28210164, 5.12298609},
                                 {3.82353558, 4.61754272, 5.49024921}};
  const double targets[3] = {0.80, 0.90, 0.95};
  for (int k = 1; k <= 3; ++k) {
    double prev_c = 0.0;
    for (int t = 0; t < 3; ++t) {
      const CalibrationResult c =
          robustmm::calibrate_efficiency(RhoKind::Biweight, k, targets[t]);
      CHECK(c.cutoff == doctest::Approx(expected[k - 1][t]).epsilon(1e-6));
      CHECK(c.efficiency == doctest::Approx(targets[t]).epsilon(1e-8));
      CHECK(c.alpha1 > 0.0);
      CHECK(c.lambda >= 1.0);
      CHECK(c.cutoff > prev_c);  // larger target, larger c
      prev_c = c.cutoff;
    }
  }
}

TEST_CASE("lambda tends to 1 as the cut-off grows") {
  CHECK(robustmm::lambda_constant(RhoFunction::biweight(1e6), 1) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(robustmm::alpha1_constant(RhoFunction::biweight(1e6), 3) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(robustmm::lambda_constant(RhoFunction::huber(40.0), 2) ==
        doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("huber winsorizing cut-off is the chi quantile") {
  const CalibrationResult c = robustmm::calibrate_winsorize(RhoKind::Huber, 2, 0.1);
  CHECK(c.cutoff == doctest::Approx(std::sqrt(-2.0 * std::log(0.1))).epsilon(1e-9));
  // independent Monte Carlo efficiency cross-check
  const RhoFunction f = RhoFunction::huber(c.cutoff);
  const auto [psi2, se] =
      oracles::mc_radial([&](double r) { return f.psi(r) * f.psi(r); }, 2, 2000000, 7);
  const double lambda_mc = psi2 / (2.0 * c.alpha1 * c.alpha1);
  CHECK(std::abs(1.0 / lambda_mc - c.efficiency) < 1e-3);
}

TEST_CASE("huber efficiency below the L1 limit has no bracket") {
  CHECK_THROWS_AS(robustmm::calibrate_efficiency(RhoKind::Huber, 1, 0.5), robustmm::NoBracket);
  CHECK(robustmm::calibrate_efficiency(RhoKind::Huber, 1, 0.9).cutoff > 0.0);
}

TEST_CASE("verify_mm_pair") {
  const RhoFunction c0 = RhoFunction::biweight(1.55);
  const RhoFunction c1 = RhoFunction::biweight(4.68);
  CHECK(robustmm::verify_mm_pair(c0, c1, 200));        // c0 <= c1
  CHECK(robustmm::verify_mm_pair(c0, c0, 200));        // equality
  CHECK_FALSE(robustmm::verify_mm_pair(RhoFunction::biweight(4.0),
                                       RhoFunction::biweight(2.0), 200));
  CHECK_THROWS_AS(robustmm::verify_mm_pair(c0, RhoFunction::huber(2.0), 200),
                  robustmm::NotBounded);
  CHECK_THROWS_AS(robustmm::verify_mm_pair(c0, c1, 50), robustmm::InvalidParams);
}

TEST_CASE("chi quantile inverts chi cdf") {
  for (int k : {1, 2, 4}) {
    for (double p : {0.1, 0.5, 0.9, 0.99}) {
      const double x = robustmm::chi_quantile(k, p);
      CHECK(robustmm::chi_cdf(k, x) == doctest::Approx(p).epsilon(1e-9));
    }
  }
}

}  // TEST_SUITE
