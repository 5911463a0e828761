#include "ilab/stats.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ilab {

namespace {
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599343818684;
constexpr double kInvSqrt2 = 0.7071067811865475244008443621048490393;
}  // namespace

double gaussian_pdf(double x) {
  if (!std::isfinite(x)) {
    throw std::domain_error("gaussian_pdf: non-finite input");
  }
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double gaussian_q(double x) {
  if (!std::isfinite(x)) {
    throw std::domain_error("gaussian_q: non-finite input");
  }
  return 0.5 * std::erfc(x * kInvSqrt2);
}

double gaussian_q_inverse(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "gaussian_q_inverse: p = " << p << " outside (0,1)";
    throw std::domain_error(msg.str());
  }
  // Q is symmetric about 1/2; work on the lower-probability side.
  const bool flipped = p > 0.5;
  const double q = flipped ? 1.0 - p : p;

  // Crude tail start, then bisection-guarded Newton on Q(x) - q.
  double x = (q > 0.15) ? 0.0 : std::sqrt(-2.0 * std::log(2.0 * q));
  double lo = 0.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double f = gaussian_q(x) - q;
    if (std::abs(f) <= 0.5e-12 * q) break;
    if (f > 0.0) {
      lo = x;  // Q too large -> x too small
    } else {
      hi = x;
    }
    const double step = f / gaussian_pdf(x);  // Q' = -phi
    double next = x + step;
    if (!(next > lo && next < hi)) {
      next = 0.5 * (lo + hi);
    }
    x = next;
  }
  return flipped ? -x : x;
}

double soft_threshold(double x, double kappa) {
  if (!(kappa >= 0.0)) {
    throw std::domain_error("soft_threshold: negative threshold");
  }
  const double mag = std::abs(x) - kappa;
  if (mag <= 0.0) return 0.0;
  return x > 0.0 ? mag : -mag;
}

MillsBracket mills_bounds(double kappa) {
  if (!(kappa > 0.0)) {
    throw std::domain_error("mills_bounds: kappa must be positive");
  }
  const double pdf = gaussian_pdf(kappa);
  const double ik = 1.0 / kappa;
  const double ik2 = ik * ik;
  const double upper = pdf * ik * (1.0 + ik2 * (-1.0 + 3.0 * ik2));
  const double lower = pdf * ik * (1.0 + ik2 * (-1.0 + ik2 * (3.0 - 15.0 * ik2)));
  return {lower, upper};
}

RegressionFit simple_ols(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("simple_ols: xs and ys differ in length");
  }
  const std::size_t n = xs.size();
  if (n < 3) {
    throw std::invalid_argument("simple_ols: need at least 3 points");
  }

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx <= 0.0) {
    throw std::invalid_argument("simple_ols: xs are constant (degenerate design)");
  }

  RegressionFit fit;
  fit.n_points = n;
  if (syy <= 0.0) {
    fit.intercept = my;
    fit.slope = 0.0;
    fit.r_squared = 1.0;
    fit.constant_response = true;
    return fit;
  }
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - fit.intercept - fit.slope * xs[i];
    ss_res += e * e;
  }
  double r2 = 1.0 - ss_res / syy;
  if (r2 < 0.0) r2 = 0.0;
  if (r2 > 1.0) r2 = 1.0;
  fit.r_squared = r2;
  return fit;
}

}  // namespace ilab
