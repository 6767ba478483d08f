#pragma once

#include <limits>

namespace robustmm {

enum class RhoKind { Biweight, Huber };

// A rho-function with cut-off c. Biweight is bounded (strictly increasing on
// [0,c], constant a = c^2/6 beyond); Huber is unbounded with bounded,
// monotone derivative. Both are symmetric with rho(0) = 0.
class RhoFunction {
 public:
  RhoFunction(RhoKind kind, double cutoff);

  static RhoFunction biweight(double cutoff) { return {RhoKind::Biweight, cutoff}; }
  static RhoFunction huber(double cutoff) { return {RhoKind::Huber, cutoff}; }

  RhoKind kind() const noexcept { return kind_; }
  double cutoff() const noexcept { return c_; }
  bool bounded() const noexcept { return kind_ == RhoKind::Biweight; }

  // sup rho: a = c^2/6 for biweight, +inf for Huber
  double sup() const noexcept {
    return bounded() ? c_ * c_ / 6.0 : std::numeric_limits<double>::infinity();
  }

  double rho(double s) const noexcept;        // rho(|s|)
  double psi(double s) const noexcept;        // rho'(s), s >= 0
  double weight(double s) const noexcept;     // u(s) = rho'(s)/s, u(0) = 1
  double psi_prime(double s) const noexcept;  // rho''(s); Huber uses 0 at the kink s = c

  // u'(s)/s, continuous at 0 (biweight: -4/c^2, Huber: 0). Needed for the
  // derivative of the score map.
  double weight_prime_over_s(double s) const noexcept;

  // inverse of rho on [0, sup); v must be in that range
  double rho_inv(double v) const;

 private:
  RhoKind kind_;
  double c_;
};

}  // namespace robustmm
