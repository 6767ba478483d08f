#include "robustmm/radial.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "robustmm/errors.hpp"

namespace robustmm {
namespace {

// The chi density is numerically zero beyond this radius for any k that
// occurs in practice (k <= ~200): exp(-45^2/2) ~ 1e-440.
constexpr double kSupportRadius = 45.0;

struct GaussLegendre {
  std::vector<double> nodes, weights;  // on [-1, 1]

  explicit GaussLegendre(int n) : nodes(n), weights(n) {
    // Newton iteration on P_n; standard Golub-free construction.
    for (int i = 0; i < (n + 1) / 2; ++i) {
      double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
      double pp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 0; j < n; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
        }
        pp = n * (x * p0 - p1) / (x * x - 1.0);
        const double dx = p0 / pp;
        x -= dx;
        if (std::abs(dx) < 1e-16) break;
      }
      nodes[i] = -x;
      nodes[n - 1 - i] = x;
      weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
  }

  double integrate(const std::function<double(double)>& f, double a, double b) const {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) acc += weights[i] * f(mid + half * nodes[i]);
    return acc * half;
  }
};

const GaussLegendre& rule96() {
  static const GaussLegendre r(96);
  return r;
}

double integrate_segments(const std::function<double(double)>& f,
                          const std::vector<double>& edges, double max_len) {
  const GaussLegendre& gl = rule96();
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    const double a = edges[i], b = edges[i + 1];
    const int chunks = std::max(1, static_cast<int>(std::ceil((b - a) / max_len)));
    for (int c = 0; c < chunks; ++c) {
      const double lo = a + (b - a) * c / chunks;
      const double hi = a + (b - a) * (c + 1) / chunks;
      total += gl.integrate(f, lo, hi);
    }
  }
  return total;
}

std::vector<double> segment_edges(const std::vector<double>& breakpoints) {
  std::vector<double> edges{0.0};
  for (double b : breakpoints)
    if (b > 0.0 && b < kSupportRadius) edges.push_back(b);
  edges.push_back(kSupportRadius);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

}  // namespace

double chi_density(int k, double r) {
  if (k < 1) throw InvalidParams("chi_density requires k >= 1");
  if (r < 0.0) return 0.0;
  if (r == 0.0) return k == 1 ? std::sqrt(2.0 / M_PI) : 0.0;
  // log form avoids overflow of r^(k-1) before the Gaussian factor kicks in
  const double logd = (1.0 - 0.5 * k) * std::log(2.0) - std::lgamma(0.5 * k) +
                      (k - 1.0) * std::log(r) - 0.5 * r * r;
  return std::exp(logd);
}

double expected_radial(const std::function<double(double)>& g, int k,
                       const std::vector<double>& breakpoints) {
  if (k < 1) throw InvalidParams("expected_radial requires k >= 1");
  const auto f = [&](double r) { return g(r) * chi_density(k, r); };
  const std::vector<double> edges = segment_edges(breakpoints);
  const double fine = integrate_segments(f, edges, 3.0);
  const double coarse = integrate_segments(f, edges, 6.0);
  const double tol = 1e-9 * std::max(std::abs(fine), 1e-12);
  if (!(std::abs(fine - coarse) <= tol) || !std::isfinite(fine))
    throw NonIntegrable("radial quadrature did not converge");
  return fine;
}

double chi_cdf(int k, double r) {
  if (r <= 0.0) return 0.0;
  if (r >= kSupportRadius) return 1.0;
  return expected_radial([r](double t) { return t <= r ? 1.0 : 0.0; }, k, {r});
}

double chi_quantile(int k, double p) {
  if (!(p > 0.0 && p < 1.0)) throw InvalidParams("chi_quantile requires p in (0,1)");
  double lo = 0.0, hi = kSupportRadius;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, lo); ++it) {
    const double mid = 0.5 * (lo + hi);
    (chi_cdf(k, mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace robustmm
