// interp-lab: batch CLI over the interpolation laboratory.
//
//   interp-lab theory isotropic --gamma 8 --sigma2 1
//   interp-lab theory spiked --n 200 --k-star 5 --lambda-head 100 --lambda-tail 1 --r2 1600 --sigma2 1
//   interp-lab run --setup s1 --n 200 --trials 20 --seed 7 --out results/
//   interp-lab plot --cells results/cells.csv --out results/plot.svg
//
// Exit codes: 0 success, 2 invalid config, 3 solver failure budget exceeded.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ilab/errors.hpp"
#include "ilab/experiments.hpp"
#include "ilab/io.hpp"
#include "ilab/theory.hpp"

namespace {

int cmd_theory_isotropic(double gamma, double sigma2, const std::string& out) {
  const auto cal = ilab::solve_isotropic(gamma, sigma2);
  std::ostringstream os;
  os << "gamma,sigma2,kappa,m2,M,alpha2\n"
     << ilab::fmt_double(cal.gamma) << ',' << ilab::fmt_double(cal.sigma2) << ','
     << ilab::fmt_double(cal.kappa) << ',' << ilab::fmt_double(cal.m2) << ','
     << ilab::fmt_double(cal.M) << ',' << ilab::fmt_double(cal.alpha2) << '\n';
  if (out.empty()) {
    std::cout << os.str();
  } else {
    ilab::write_text_file(out, os.str());
  }
  return 0;
}

int cmd_theory_spiked(std::size_t n, std::size_t k_star, double lambda_head, double lambda_tail,
                      std::size_t r2, double sigma2, const std::string& out) {
  const auto cov = ilab::build_covariance(ilab::CovKind::SpikedIsotropic, k_star + r2, k_star,
                                          lambda_head, lambda_tail);
  const auto cal = ilab::solve_spiked(cov, n, sigma2);
  std::ostringstream os;
  os << "n,k_star,lambda_head,lambda_tail,r2,sigma2,tau,kappa_tail,b2,e_head,e_tail,e_total,"
        "residual\n"
     << n << ',' << k_star << ',' << ilab::fmt_double(lambda_head) << ','
     << ilab::fmt_double(lambda_tail) << ',' << r2 << ',' << ilab::fmt_double(sigma2) << ','
     << ilab::fmt_double(cal.tau) << ',' << ilab::fmt_double(cal.kappa_tail) << ','
     << ilab::fmt_double(cal.b2) << ',' << ilab::fmt_double(cal.e_head) << ','
     << ilab::fmt_double(cal.e_tail) << ',' << ilab::fmt_double(cal.e_total) << ','
     << ilab::fmt_double(cal.residual) << '\n';
  if (out.empty()) {
    std::cout << os.str();
  } else {
    ilab::write_text_file(out, os.str());
  }
  return 0;
}

int cmd_plot(const std::string& cells_path, const std::string& out_path) {
  std::ifstream is(cells_path);
  if (!is) {
    std::cerr << "cannot open " << cells_path << "\n";
    return 2;
  }
  std::vector<ilab::Cell> cells;
  std::string line;
  std::getline(is, line);  // header
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 10) {
      std::cerr << "malformed row: " << line << "\n";
      return 2;
    }
    ilab::Cell c;
    c.gamma = std::stod(fields[1]);
    c.n = std::stoul(fields[2]);
    c.p = std::stoul(fields[3]);
    c.estimator = fields[4];
    c.ensemble = fields[5];
    c.mean_risk = std::stod(fields[6]);
    c.std_risk = std::stod(fields[7]);
    c.mean_linf = std::stod(fields[8]);
    c.trials = std::stoul(fields[9]);
    cells.push_back(std::move(c));
  }
  ilab::write_text_file(out_path, ilab::cells_to_svg(cells, false));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"interp-lab: l1 interpolation and boosting-flow laboratory"};
  app.require_subcommand(1);
  app.set_config("--config");

  // theory
  auto* theory = app.add_subcommand("theory", "evaluate the calibration oracle");
  theory->require_subcommand(1);

  double gamma = 2.0, sigma2 = 1.0;
  std::string theory_out;
  auto* iso = theory->add_subcommand("isotropic", "isotropic pure-noise calibration");
  iso->add_option("--gamma", gamma, "overparameterization ratio p/n (> 1)")->required();
  iso->add_option("--sigma2", sigma2, "noise variance");
  iso->add_option("--out", theory_out, "output CSV path (default stdout)");

  std::size_t sp_n = 200, sp_k = 5, sp_r2 = 1600;
  double sp_lh = 100.0, sp_lt = 1.0, sp_s2 = 1.0;
  std::string spiked_out;
  auto* spk = theory->add_subcommand("spiked", "spiked-isotropic calibration");
  spk->add_option("--n", sp_n, "sample size")->required();
  spk->add_option("--k-star", sp_k, "head dimension")->required();
  spk->add_option("--lambda-head", sp_lh, "head eigenvalue")->required();
  spk->add_option("--lambda-tail", sp_lt, "tail eigenvalue")->required();
  spk->add_option("--r2", sp_r2, "tail effective rank")->required();
  spk->add_option("--sigma2", sp_s2, "noise variance");
  spk->add_option("--out", spiked_out, "output CSV path (default stdout)");

  // run
  ilab::ExperimentConfig cfg;
  std::string setup_name = "s1";
  std::string gammas_csv, ensembles_csv;
  auto* run = app.add_subcommand("run", "run an experiment setup");
  run->add_option("--setup", setup_name, "one of s1..s5")->required();
  run->add_option("--n", cfg.n, "sample size")->required();
  run->add_option("--trials", cfg.trials, "trials per cell")->required();
  run->add_option("--seed", cfg.base_seed, "base seed")->required();
  run->add_option("--gammas", gammas_csv, "comma-separated gamma grid");
  run->add_option("--ensembles", ensembles_csv,
                  "comma-separated feature ensembles (gaussian,rademacher,student_t4)");
  run->add_option("--sigma2", cfg.sigma2, "noise variance");
  run->add_option("--k-star", cfg.k_star, "spiked head dimension (s3)");
  run->add_option("--lambda-head", cfg.lambda_head, "head eigenvalue (s3)");
  run->add_option("--lambda-tail", cfg.lambda_tail, "tail eigenvalue (s3)");
  run->add_option("--signal-support", cfg.signal_support, "sparse support size (s4/s5)");
  run->add_option("--signal-magnitude", cfg.signal_magnitude, "signal magnitude (s4/s5)");
  run->add_option("--p", cfg.p_flow, "feature count for flow setups (0 = gamma*n)");
  run->add_option("--gamma-flow", cfg.gamma_flow, "p/n for flow setups when --p is 0");
  run->add_option("--stopping-c", cfg.stopping_c, "noise-floor constant c > 1");
  run->add_option("--bp-tol", cfg.bp_tol, "basis pursuit feasibility tolerance");
  run->add_option("--step-eps", cfg.step_eps, "flow step size (0 = auto)");
  run->add_option("--record-stride", cfg.record_stride, "trajectory record stride");
  run->add_option("--max-steps", cfg.max_steps, "flow step cap");
  run->add_option("--threads", cfg.threads, "worker threads")
      ->envname("INTERP_LAB_THREADS");
  run->add_option("--out", cfg.out_dir, "output directory")->required();
  run->add_flag("--svg", cfg.emit_svg, "emit SVG plots");

  // plot
  std::string plot_cells, plot_out;
  auto* plot = app.add_subcommand("plot", "plot a cells CSV as SVG");
  plot->add_option("--cells", plot_cells, "cells.csv path")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (iso->parsed()) return cmd_theory_isotropic(gamma, sigma2, theory_out);
    if (spk->parsed()) return cmd_theory_spiked(sp_n, sp_k, sp_lh, sp_lt, sp_r2, sp_s2, spiked_out);
    if (plot->parsed()) return cmd_plot(plot_cells, plot_out);

    if (run->parsed()) {
      cfg.setup = ilab::setup_from_string(setup_name);
      if (!gammas_csv.empty()) {
        cfg.gamma_grid.clear();
        std::stringstream ss(gammas_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.gamma_grid.push_back(std::stod(tok));
      }
      if (!ensembles_csv.empty()) {
        cfg.ensembles.clear();
        std::stringstream ss(ensembles_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) cfg.ensembles.push_back(ilab::ensemble_from_string(tok));
      }
      if (cfg.threads == 0) cfg.threads = 1;
      const auto result = ilab::run_experiment(cfg);
      ilab::emit_outputs(result, cfg);
      bool budget_exceeded = false;
      for (const auto& c : result.cells) budget_exceeded |= c.incomplete;
      if (budget_exceeded) {
        std::cerr << "solver failure budget exceeded (incomplete cells)\n";
        return 3;
      }
      std::cout << "wrote " << cfg.out_dir << "/cells.csv (" << result.cells.size()
                << " cells, " << result.failed_trials << " failed trials)\n";
      return 0;
    }
  } catch (const ilab::InvalidSpecError& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
