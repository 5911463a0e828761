#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/rng.hpp"

namespace ilab {

/// E[S^2(g; kappa)] for g ~ N(0,1), closed form 2[(1+k^2)Q(k) - k phi(k)].
/// Values below 1e-300 (kappa >= 30) are reported as exact 0 with the flag set.
struct TruncatedMoment {
  double value = 0.0;
  bool underflow = false;
};
TruncatedMoment truncated_second_moment_ex(double kappa);
double truncated_second_moment(double kappa);

struct ShiftedMoments {
  double exceed_prob = 0.0;             // P(|g + c| > kappa) = Q(k-c) + Q(k+c)
  double second_moment_centered = 0.0;  // E[(S(g+c; kappa) - c)^2]
};
ShiftedMoments shifted_moments(double c, double kappa);

struct SteinCheck {
  double mc_estimate = 0.0;  // Monte Carlo mean of g * S(g; kappa)
  double exact = 0.0;        // 2 Q(kappa), the Stein identity value
  double std_error = 0.0;
};
SteinCheck stein_identity_check(double kappa, std::size_t samples, const RngStream& stream);

/// Scalar saddle-point outputs for the isotropic pure-noise model: the threshold
/// kappa solves gamma * 2Q(kappa) = 1 and the predicted risk is
/// alpha2 = sigma2 * M / (1 - M) with M = gamma * E[S^2(g; kappa)].
struct IsotropicCalibration {
  double gamma = 0.0;
  double sigma2 = 0.0;
  double kappa = 0.0;
  double m2 = 0.0;
  double M = 0.0;
  double alpha2 = 0.0;
};
IsotropicCalibration solve_isotropic(double gamma, double sigma2);

struct SpikedCalibration {
  double tau = 0.0;   // dual scale
  double b2 = 0.0;    // sigma2 + e_total
  std::vector<double> kappa_head;  // 1/(tau sqrt(lambda_i)), i < k_star
  double kappa_tail = 0.0;
  double e_head = 0.0;
  double e_tail = 0.0;
  double e_total = 0.0;
  std::vector<double> c_head;  // sqrt(lambda_i) beta*_i / (b sqrt(n)); zero under pure noise
  double residual = 0.0;       // calibration residual at the solution
  std::size_t iterations = 0;
};

/// Spiked-isotropic saddle point at finite (n, p): bisection on tau for the
/// calibration equation; with a signal, an outer damped fixed point on b.
/// Requires r2 > n (benign regime) for the risk fixed point.
SpikedCalibration solve_spiked(const CovarianceSpec& cov, std::size_t n, double sigma2,
                               const std::optional<Eigen::VectorXd>& beta_star = std::nullopt);

struct RatePoint {
  double gamma = 0.0;
  double predicted_risk = 0.0;
  double inv_log_gamma = 0.0;  // natural log
};

struct SpikedRateParams {
  std::size_t n = 0;
  std::size_t k_star = 0;
  double lambda_head = 1.0;
  double lambda_tail = 1.0;
};

/// Predicted risk across a gamma grid. For the spiked kind, gamma is the tail
/// ratio r2/n and params must be given.
std::vector<RatePoint> rate_prediction(std::span<const double> gamma_grid, double sigma2,
                                       CovKind kind,
                                       const std::optional<SpikedRateParams>& params = std::nullopt);

}  // namespace ilab
