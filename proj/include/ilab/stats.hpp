#pragma once

#include <cstddef>
#include <span>

namespace ilab {

/// Standard normal density. Total on finite inputs; stays nonzero down to the
/// subnormal range (|x| <= 38).
double gaussian_pdf(double x);

/// Upper tail Q(x) = P(g > x) for g ~ N(0,1), computed through erfc so the far
/// tail keeps full relative accuracy (1 - CDF would lose every digit past x ~ 8).
double gaussian_q(double x);

/// Inverse of gaussian_q on (0,1). Bisection-guarded Newton; the result x
/// satisfies |gaussian_q(x) - p| <= 1e-12 * p.
double gaussian_q_inverse(double p);

/// S(x; kappa) = sign(x) * (|x| - kappa)_+, the l1 proximal map.
double soft_threshold(double x, double kappa);

struct MillsBracket {
  double lower;  // phi(k) * (1/k - 1/k^3 + 3/k^5 - 15/k^7)
  double upper;  // phi(k) * (1/k - 1/k^3 + 3/k^5)
};

/// Polynomial-in-1/kappa tail bounds on Q(kappa). The sandwich
/// lower <= Q(kappa) <= upper is guaranteed for kappa >= 2; for small kappa the
/// bounds are returned but are asymptotic only.
MillsBracket mills_bounds(double kappa);

struct RegressionFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  // Constant responses make SS_tot = 0; we report a perfect flat fit instead of NaN
  // so experiment pipelines stay total.
  bool constant_response = false;
};

/// Ordinary least squares of ys on xs with R^2. Requires >= 3 points and
/// non-constant xs.
RegressionFit simple_ols(std::span<const double> xs, std::span<const double> ys);

}  // namespace ilab
