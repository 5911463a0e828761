#include "ilab/theory.hpp"

#include <cmath>
#include <sstream>

#include "ilab/errors.hpp"
#include "ilab/stats.hpp"

namespace ilab {

TruncatedMoment truncated_second_moment_ex(double kappa) {
  if (!(kappa >= 0.0)) throw std::domain_error("truncated_second_moment: kappa < 0");
  const double v =
      2.0 * ((1.0 + kappa * kappa) * gaussian_q(kappa) - kappa * gaussian_pdf(kappa));
  if (kappa >= 30.0 || v < 1e-300) {
    return {0.0, true};
  }
  return {v < 0.0 ? 0.0 : v, false};
}

double truncated_second_moment(double kappa) { return truncated_second_moment_ex(kappa).value; }

ShiftedMoments shifted_moments(double c, double kappa) {
  if (!(kappa >= 0.0)) throw std::domain_error("shifted_moments: kappa < 0");
  const double qm = gaussian_q(kappa - c);
  const double qp = gaussian_q(kappa + c);
  const double pm = gaussian_pdf(kappa - c);
  const double pp = gaussian_pdf(kappa + c);
  ShiftedMoments out;
  out.exceed_prob = qm + qp;
  // Pieces of E[(S(g+c;k) - c)^2] over the three thresholding regions, using
  // int_a^inf (g-d)^2 phi = (1+d^2)Q(a) + (a-2d) phi(a).
  const double k2 = kappa * kappa;
  const double upper = (1.0 + k2) * qm - (kappa + c) * pm;
  const double lower = (1.0 + k2) * qp + (c - kappa) * pp;
  const double dead = c * c * (1.0 - qm - qp);
  out.second_moment_centered = upper + lower + dead;
  return out;
}

SteinCheck stein_identity_check(double kappa, std::size_t samples, const RngStream& stream) {
  if (samples < 10000) throw std::invalid_argument("stein_identity_check: samples < 1e4");
  Rng rng(stream);
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const double g = rng.normal();
    const double v = g * soft_threshold(g, kappa);
    sum += v;
    sum2 += v * v;
  }
  const double dn = static_cast<double>(samples);
  SteinCheck out;
  out.mc_estimate = sum / dn;
  const double var = std::max(0.0, sum2 / dn - out.mc_estimate * out.mc_estimate);
  out.std_error = std::sqrt(var / dn);
  out.exact = 2.0 * gaussian_q(kappa);
  return out;
}

IsotropicCalibration solve_isotropic(double gamma, double sigma2) {
  if (!(gamma > 1.0)) throw std::domain_error("solve_isotropic: gamma must exceed 1");
  IsotropicCalibration cal;
  cal.gamma = gamma;
  cal.sigma2 = sigma2;
  cal.kappa = gaussian_q_inverse(1.0 / (2.0 * gamma));
  cal.m2 = truncated_second_moment(cal.kappa);
  cal.M = gamma * cal.m2;
  if (cal.M >= 1.0 - 1e-6) {
    std::ostringstream msg;
    msg << "solve_isotropic: near-critical M = " << cal.M << " at gamma = " << gamma;
    throw SolverError(msg.str(), cal.M);
  }
  cal.alpha2 = sigma2 * cal.M / (1.0 - cal.M);
  return cal;
}

namespace {

struct SpikedSystem {
  const CovarianceSpec& cov;
  double n;
  std::vector<double> c;  // per-head shift, zero for pure noise

  double kappa_head(std::size_t i, double tau) const {
    return 1.0 / (tau * std::sqrt(cov.eigenvalue(i)));
  }
  double kappa_tail(double tau) const { return 1.0 / (tau * std::sqrt(cov.lambda_tail)); }

  double calibration_residual(double tau) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < cov.k_star; ++i) {
      acc += shifted_moments(c[i], kappa_head(i, tau)).exceed_prob;
    }
    acc /= n;
    acc += (cov.r2 / n) * 2.0 * gaussian_q(kappa_tail(tau));
    return acc - 1.0;
  }

  // Monotone increasing in tau (larger tau -> smaller thresholds -> larger
  // exceedance), so plain bisection applies.
  double solve_tau() const {
    double lo = 1e-12, hi = 1.0;
    if (calibration_residual(lo) > 0.0) {
      throw SolverError("solve_spiked: calibration residual does not bracket zero (low end)");
    }
    int guard = 0;
    while (calibration_residual(hi) < 0.0) {
      hi *= 2.0;
      if (++guard > 100) {
        throw SolverError("solve_spiked: calibration residual does not bracket zero (high end)");
      }
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (calibration_residual(mid) < 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= 1e-16 * hi) break;
    }
    return 0.5 * (lo + hi);
  }

  double head_moment_sum(double tau) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < cov.k_star; ++i) {
      acc += shifted_moments(c[i], kappa_head(i, tau)).second_moment_centered;
    }
    return acc / n;
  }
  double tail_moment(double tau) const {
    return (cov.r2 / n) * truncated_second_moment(kappa_tail(tau));
  }
};

}  // namespace

SpikedCalibration solve_spiked(const CovarianceSpec& cov, std::size_t n, double sigma2,
                               const std::optional<Eigen::VectorXd>& beta_star) {
  if (cov.kind != CovKind::SpikedIsotropic && cov.k_star != 0) {
    throw InvalidSpecError("solve_spiked: covariance must be spiked-isotropic");
  }
  if (!(cov.r2 > static_cast<double>(n))) {
    throw SolverError("solve_spiked: risk fixed point requires r2 > n (benign regime)");
  }
  const double dn = static_cast<double>(n);

  SpikedSystem sys{cov, dn, std::vector<double>(cov.k_star, 0.0)};
  SpikedCalibration out;

  const bool pure_noise =
      !beta_star.has_value() || beta_star->lpNorm<1>() == 0.0;
  if (!pure_noise) {
    if (beta_star->size() != static_cast<Eigen::Index>(cov.p)) {
      throw std::invalid_argument("solve_spiked: beta_star dimension mismatch");
    }
    for (Eigen::Index j = static_cast<Eigen::Index>(cov.k_star); j < beta_star->size(); ++j) {
      if ((*beta_star)(j) != 0.0) {
        throw InvalidSpecError("solve_spiked: signal support must lie in the head");
      }
    }
  }

  if (pure_noise) {
    const double tau = sys.solve_tau();
    const double M = sys.head_moment_sum(tau) + sys.tail_moment(tau);
    if (M >= 1.0 - 1e-6) {
      throw SolverError("solve_spiked: near-critical moment ratio", M);
    }
    out.tau = tau;
    out.e_total = sigma2 * M / (1.0 - M);
    out.b2 = sigma2 + out.e_total;
    out.e_head = out.b2 * sys.head_moment_sum(tau);
    out.e_tail = out.b2 * sys.tail_moment(tau);
    out.residual = sys.calibration_residual(tau);
    out.iterations = 1;
  } else {
    double b2 = 2.0 * sigma2;  // start above the noise floor
    bool converged = false;
    std::size_t it = 0;
    auto refresh_shifts = [&](double b2_cur) {
      const double b = std::sqrt(b2_cur);
      for (std::size_t i = 0; i < cov.k_star; ++i) {
        sys.c[i] = std::sqrt(cov.eigenvalue(i)) * (*beta_star)(static_cast<Eigen::Index>(i)) /
                   (b * std::sqrt(dn));
      }
    };
    for (it = 1; it <= 500; ++it) {
      refresh_shifts(b2);
      const double tau = sys.solve_tau();
      const double b2_next =
          sigma2 + b2 * (sys.head_moment_sum(tau) + sys.tail_moment(tau));
      if (std::abs(b2_next - b2) <= 1e-10 * std::max(1.0, b2)) {
        converged = true;
        break;
      }
      b2 = 0.5 * (b2 + b2_next);  // damping 0.5
    }
    if (!converged) {
      std::ostringstream msg;
      msg << "solve_spiked: fixed point did not converge (last b2 = " << b2 << ")";
      throw SolverError(msg.str(), b2);
    }
    refresh_shifts(b2);
    const double tau = sys.solve_tau();
    out.tau = tau;
    out.b2 = b2;
    out.e_head = b2 * sys.head_moment_sum(tau);
    out.e_tail = b2 * sys.tail_moment(tau);
    out.e_total = out.e_head + out.e_tail;
    out.residual = sys.calibration_residual(tau);
    out.iterations = it;
  }

  out.kappa_head.resize(cov.k_star);
  for (std::size_t i = 0; i < cov.k_star; ++i) out.kappa_head[i] = sys.kappa_head(i, out.tau);
  out.kappa_tail = sys.kappa_tail(out.tau);
  out.c_head = sys.c;
  return out;
}

std::vector<RatePoint> rate_prediction(std::span<const double> gamma_grid, double sigma2,
                                       CovKind kind,
                                       const std::optional<SpikedRateParams>& params) {
  for (double g : gamma_grid) {
    if (!(g > 1.0)) {
      std::ostringstream msg;
      msg << "rate_prediction: gamma = " << g << " must exceed 1";
      throw std::domain_error(msg.str());
    }
  }
  if (kind == CovKind::SpikedIsotropic && !params.has_value()) {
    throw std::invalid_argument("rate_prediction: spiked kind needs SpikedRateParams");
  }

  std::vector<RatePoint> out;
  out.reserve(gamma_grid.size());
  for (double g : gamma_grid) {
    RatePoint pt;
    pt.gamma = g;
    pt.inv_log_gamma = 1.0 / std::log(g);
    if (kind == CovKind::Isotropic) {
      pt.predicted_risk = solve_isotropic(g, sigma2).alpha2;
    } else {
      const auto& pr = *params;
      const auto r2 = static_cast<std::size_t>(std::llround(g * static_cast<double>(pr.n)));
      const auto cov = build_covariance(CovKind::SpikedIsotropic, pr.k_star + r2, pr.k_star,
                                        pr.lambda_head, pr.lambda_tail);
      pt.predicted_risk = solve_spiked(cov, pr.n, sigma2).e_total;
    }
    out.push_back(pt);
  }
  return out;
}

}  // namespace ilab
