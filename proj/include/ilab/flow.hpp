#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/rng.hpp"

namespace ilab {

struct FlowConfig {
  double step_eps = 0.0;          // coefficient increment per event; 0 = auto scale
  std::size_t max_steps = 200000;
  std::size_t record_stride = 32;  // trajectory thinning
  std::optional<double> stop_threshold;  // used when no StoppingRule is supplied
  bool run_past_stop = false;
  // When running past the stop, halt once rho falls to this fraction of the
  // threshold (deep enough that the noise-interpolation rebound is visible).
  double past_stop_floor_frac = 0.15;
};

enum class StoppingKind { Oracle, Adaptive };

struct StoppingRule {
  StoppingKind kind = StoppingKind::Oracle;
  double sigma = 0.0;     // true sigma or plug-in estimate
  double c = 1.1;         // constant > 1 in the noise floor
  double lambda_n = 0.0;  // sigma * sqrt(2 c log p / n)
  double threshold = 0.0; // 2 * lambda_n
};

struct BoostingTrajectory {
  std::vector<std::size_t> steps;  // global step index of each record
  std::vector<double> times;       // t_k = step * eps
  std::vector<double> rho;         // max absolute correlation
  std::vector<double> l1_norm;
  std::vector<double> risk;        // exact excess risk
  std::vector<char> stopped_flag;  // 1 from the crossing record onward

  Eigen::VectorXd beta_at_stop;  // beta(t*) when crossed, else final iterate
  Eigen::VectorXd beta_final;
  Eigen::VectorXd beta_min_risk;            // iterate at the lowest recorded risk
  std::size_t min_risk_index = 0;
  std::optional<std::size_t> t_star_index;  // index into the recorded arrays
  std::size_t t_star_step = 0;              // global step of the crossing
  bool crossed = false;
  bool started_below_threshold = false;  // rho(0) <= threshold, t* = 0

  double step_eps = 0.0;          // realized step
  double rho0 = 0.0;
  double max_recorded_rho_increase = 0.0;
};

/// Exact negative gradient (1/n) Phi^T (Y - Phi beta).
Eigen::VectorXd negative_gradient(const Dataset& dataset, const Eigen::VectorXd& beta);

/// Called at every trajectory record with the current iterate.
using FlowRecordCallback = std::function<void(std::size_t step, const Eigen::VectorXd& beta)>;

/// Small-step forward-stagewise simulation of the boosting flow: per event the
/// coordinate of maximum |g| moves by eps * sign(g); ties break to the lowest
/// index. Records (rho, l1, risk) every record_stride steps plus the exact
/// crossing step.
BoostingTrajectory run_flow(const Dataset& dataset, const FlowConfig& config,
                            const std::optional<StoppingRule>& rule = std::nullopt,
                            const FlowRecordCallback& on_record = {});

/// lambda_n = sigma sqrt(2 c log p / n); threshold = 2 lambda_n. Requires c > 1,
/// sigma > 0.
StoppingRule oracle_threshold(double sigma, std::size_t p, std::size_t n, double c);

struct RcvEstimate {
  double sigma2_hat = 0.0;
  double sigma2_half1 = 0.0;
  double sigma2_half2 = 0.0;
  std::size_t support1 = 0;
  std::size_t support2 = 0;
  bool cap_hit = false;
};

/// Refitted cross-validation noise estimate: split-half lasso support selection
/// plus restricted OLS refit on the other half, averaged over the swap. The
/// stream parameter is reserved for shuffled-split variants; the default split
/// is the deterministic first/second half of the (already random) rows.
RcvEstimate rcv_variance_estimate(const Dataset& dataset, const RngStream& stream);

/// StoppingRule with sigma replaced by the RCV estimate.
StoppingRule adaptive_threshold(const Dataset& dataset, const RngStream& stream, double c);

}  // namespace ilab
