#pragma once

#include <functional>
#include <vector>

namespace robustmm {

// Density of ||z|| for z ~ N(0, I_k), i.e. the chi distribution with k
// degrees of freedom.
double chi_density(int k, double r);

double chi_cdf(int k, double r);

// Smallest r with chi_cdf(k, r) >= p, for p in (0, 1).
double chi_quantile(int k, double p);

// E[g(||z||)] for z ~ N(0, I_k), computed by composite Gauss-Legendre
// quadrature. g must be piecewise continuous and polynomially bounded;
// kinks of g should be listed in breakpoints so segments stay smooth.
// Throws NonIntegrable when the refined and coarse rules disagree beyond
// 1e-9 relative.
double expected_radial(const std::function<double(double)>& g, int k,
                       const std::vector<double>& breakpoints = {});

}  // namespace robustmm
