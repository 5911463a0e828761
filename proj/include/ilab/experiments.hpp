#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ilab/design.hpp"
#include "ilab/flow.hpp"
#include "ilab/stats.hpp"
#include "ilab/theory.hpp"

namespace ilab {

enum class Setup { S1, S2, S3, S4, S5 };
const char* to_string(Setup s);
Setup setup_from_string(std::string_view name);

struct ExperimentConfig {
  Setup setup = Setup::S1;
  std::size_t n = 200;
  std::vector<double> gamma_grid;  // empty = per-setup default
  std::size_t trials = 20;
  double sigma2 = 1.0;
  std::uint64_t base_seed = 1;
  std::vector<Ensemble> ensembles;  // empty = default (S2: all three, else Gaussian)

  // spiked design (S3)
  std::size_t k_star = 5;
  double lambda_head = 100.0;
  double lambda_tail = 1.0;

  // sparse signal + flow (S4/S5)
  std::size_t signal_support = 5;
  double signal_magnitude = 3.0;
  std::size_t p_flow = 0;    // direct p for S4/S5; 0 -> round(gamma_flow * n)
  double gamma_flow = 2.0;
  double stopping_c = 1.1;
  double step_eps = 0.0;  // 0 = auto
  std::size_t record_stride = 32;
  std::size_t max_steps = 60000;

  double bp_tol = 1e-8;
  std::size_t threads = 1;
  std::string out_dir;
  bool emit_svg = false;

  void validate() const;
  std::vector<double> effective_gammas() const;
  std::vector<Ensemble> effective_ensembles() const;
};

/// One aggregation cell of the results table.
struct Cell {
  std::string estimator;
  std::string ensemble;
  double gamma = 0.0;  // realized (p and n are rounded first)
  std::size_t n = 0;
  std::size_t p = 0;
  double mean_risk = 0.0;
  double std_risk = 0.0;
  double mean_linf = 0.0;
  std::size_t trials = 0;
  bool incomplete = false;
};

/// Per-trial stopping diagnostics for the flow setups.
struct StoppingTrial {
  std::size_t trial = 0;
  bool ok = false;
  std::string error;

  double risk_at_stop = 0.0;
  double min_path_risk = 0.0;
  double final_risk = 0.0;
  double risk_at_cv_stop = 0.0;
  double lasso_cv_risk = 0.0;
  std::size_t t_star_step = 0;
  std::size_t cv_stop_step = 0;
  double rho_at_stop = 0.0;
  double threshold = 0.0;
  double lambda_n = 0.0;  // oracle noise floor (true sigma)
  bool crossed = false;
  bool u_shaped = false;
  bool noise_event = false;
  bool basic_inequality_ok = false;
  double pred_error = 0.0;  // (1/n)||Phi(beta(t*) - beta*)||^2
  double l1_error = 0.0;    // ||beta(t*) - beta*||_1
  double l1_ratio = 0.0;    // ||beta(t*)||_1 / ||beta*||_1 (recorded, never asserted)
  double max_recorded_rho_increase = 0.0;

  // adaptive stopping extras (S5)
  double sigma2_hat = 0.0;
  double rel_threshold_gap = 0.0;          // |lambda_hat - lambda| / lambda
  std::size_t t_star_oracle_step = 0;      // stride-granular oracle crossing
};

struct ExperimentResult {
  Setup setup = Setup::S1;
  ExperimentConfig config;
  std::vector<Cell> cells;

  struct Fit {
    std::string estimator;
    std::string ensemble;
    RegressionFit fit;
  };
  std::vector<Fit> fits;

  struct TheoryPoint {
    double gamma = 0.0;
    double predicted = 0.0;
  };
  std::vector<TheoryPoint> theory;

  std::vector<StoppingTrial> stopping;
  std::vector<BoostingTrajectory> trajectories;  // S4/S5, one per successful trial

  std::uint64_t config_hash = 0;
  std::size_t failed_trials = 0;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// OLS of a cell set's mean risk against 1/log(gamma), optionally restricted to
/// gamma >= min_gamma. Needs at least 3 points.
RegressionFit fit_rate(const std::vector<Cell>& cells, const std::string& estimator,
                       const std::string& ensemble, double min_gamma = 0.0);

std::string cells_to_csv(const ExperimentResult& result);
std::string summary_to_json(const ExperimentResult& result);

/// Writes cells.csv, summary.json, per-trial trajectory CSVs (flow setups) and
/// optional SVG plots into config.out_dir.
void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config);

/// Presentation-only line plots (risk vs gamma, risk vs 1/log gamma).
std::string cells_to_svg(const std::vector<Cell>& cells, bool inverse_log_axis);

}  // namespace ilab
