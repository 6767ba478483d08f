#include "robustmm/rho.hpp"

#include <cmath>

#include "robustmm/errors.hpp"

namespace robustmm {

RhoFunction::RhoFunction(RhoKind kind, double cutoff) : kind_(kind), c_(cutoff) {
  if (!(cutoff > 0.0) || !std::isfinite(cutoff))
    throw InvalidParams("rho cutoff must be positive and finite");
}

double RhoFunction::rho(double s) const noexcept {
  s = std::abs(s);
  if (kind_ == RhoKind::Biweight) {
    if (s >= c_) return c_ * c_ / 6.0;
    const double s2 = s * s;
    return s2 / 2.0 - s2 * s2 / (2.0 * c_ * c_) + s2 * s2 * s2 / (6.0 * c_ * c_ * c_ * c_);
  }
  if (s <= c_) return 0.5 * s * s;
  return -0.5 * c_ * c_ + c_ * s;
}

double RhoFunction::psi(double s) const noexcept {
  if (kind_ == RhoKind::Biweight) {
    if (s >= c_) return 0.0;
    const double t = 1.0 - (s / c_) * (s / c_);
    return s * t * t;
  }
  return s <= c_ ? s : c_;
}

double RhoFunction::weight(double s) const noexcept {
  if (kind_ == RhoKind::Biweight) {
    if (s >= c_) return 0.0;
    const double t = 1.0 - (s / c_) * (s / c_);
    return t * t;
  }
  return s <= c_ ? 1.0 : c_ / s;
}

double RhoFunction::psi_prime(double s) const noexcept {
  if (kind_ == RhoKind::Biweight) {
    if (s >= c_) return 0.0;
    const double t = (s / c_) * (s / c_);
    return (1.0 - t) * (1.0 - 5.0 * t);
  }
  return s < c_ ? 1.0 : 0.0;
}

double RhoFunction::weight_prime_over_s(double s) const noexcept {
  if (kind_ == RhoKind::Biweight) {
    if (s >= c_) return 0.0;
    return -4.0 * (1.0 - (s / c_) * (s / c_)) / (c_ * c_);
  }
  if (s <= c_) return 0.0;
  return -c_ / (s * s * s);
}

double RhoFunction::rho_inv(double v) const {
  if (v < 0.0 || v >= sup()) throw InvalidParams("rho_inv argument outside [0, sup rho)");
  if (v == 0.0) return 0.0;
  if (kind_ == RhoKind::Huber) {
    const double knee = 0.5 * c_ * c_;
    if (v <= knee) return std::sqrt(2.0 * v);
    return (v + knee) / c_;
  }
  // strictly increasing on [0, c]
  double lo = 0.0, hi = c_;
  for (int it = 0; it < 200 && hi - lo > 1e-15 * c_; ++it) {
    const double mid = 0.5 * (lo + hi);
    (rho(mid) < v ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace robustmm
