#include "ilab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "ilab/errors.hpp"
#include "ilab/interpolants.hpp"
#include "ilab/io.hpp"

namespace ilab {

const char* to_string(Setup s) {
  switch (s) {
    case Setup::S1:
      return "s1";
    case Setup::S2:
      return "s2";
    case Setup::S3:
      return "s3";
    case Setup::S4:
      return "s4";
    case Setup::S5:
      return "s5";
  }
  return "?";
}

Setup setup_from_string(std::string_view name) {
  if (name == "s1") return Setup::S1;
  if (name == "s2") return Setup::S2;
  if (name == "s3") return Setup::S3;
  if (name == "s4") return Setup::S4;
  if (name == "s5") return Setup::S5;
  throw InvalidSpecError("unknown setup: " + std::string(name));
}

void ExperimentConfig::validate() const {
  std::vector<std::string> bad;
  if (trials < 1) bad.push_back("trials must be >= 1");
  if (n < 1) bad.push_back("n must be >= 1");
  if (!(sigma2 > 0.0)) bad.push_back("sigma2 must be > 0");
  if (!(stopping_c > 1.0)) bad.push_back("stopping constant c must exceed 1");
  const auto gs = effective_gammas();
  for (std::size_t i = 1; i < gs.size(); ++i) {
    if (!(gs[i] > gs[i - 1])) {
      bad.push_back("gamma grid must be strictly increasing");
      break;
    }
  }
  if ((setup == Setup::S1 || setup == Setup::S2 || setup == Setup::S3) && gs.empty()) {
    bad.push_back("gamma grid is empty");
  }
  if (setup == Setup::S3 && (k_star == 0 || !(lambda_head >= lambda_tail) || !(lambda_tail > 0))) {
    bad.push_back("invalid spiked parameters");
  }
  if ((setup == Setup::S4 || setup == Setup::S5)) {
    const std::size_t p = p_flow ? p_flow : static_cast<std::size_t>(
                                                std::llround(gamma_flow * static_cast<double>(n)));
    if (p <= n) bad.push_back("flow setups need p > n");
    if (signal_support > p) bad.push_back("signal support exceeds p");
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "invalid experiment config:";
    for (const auto& b : bad) msg << " [" << b << "]";
    throw InvalidSpecError(msg.str());
  }
}

std::vector<double> ExperimentConfig::effective_gammas() const {
  if (!gamma_grid.empty()) return gamma_grid;
  switch (setup) {
    case Setup::S1:
    case Setup::S2:
      return {2, 4, 8, 16, 30};
    case Setup::S3:
      return {0.8, 1.0, 1.5, 2, 4, 8, 16, 30};
    case Setup::S4:
    case Setup::S5:
      return {gamma_flow};
  }
  return {};
}

std::vector<Ensemble> ExperimentConfig::effective_ensembles() const {
  if (!ensembles.empty()) return ensembles;
  if (setup == Setup::S2) {
    return {Ensemble::Gaussian, Ensemble::Rademacher, Ensemble::StudentT4};
  }
  return {Ensemble::Gaussian};
}

namespace {

std::uint64_t trial_stream_id(Setup setup, std::size_t ensemble_idx, std::size_t gamma_idx,
                              std::size_t trial) {
  std::uint64_t h = mix64(static_cast<std::uint64_t>(setup) + 0x53u);
  h = mix_seed(h, ensemble_idx);
  h = mix_seed(h, gamma_idx);
  h = mix_seed(h, trial);
  return h;
}

void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(threads, count);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

std::uint64_t hash_string(std::uint64_t h, const std::string& s) {
  for (unsigned char c : s) h = mix_seed(h, c);
  return h;
}

std::uint64_t config_hash(const ExperimentConfig& c) {
  std::ostringstream os;
  os << to_string(c.setup) << '|' << c.n << '|' << c.trials << '|' << fmt_double(c.sigma2) << '|'
     << c.base_seed << '|' << c.k_star << '|' << fmt_double(c.lambda_head) << '|'
     << fmt_double(c.lambda_tail) << '|' << c.signal_support << '|'
     << fmt_double(c.signal_magnitude) << '|' << c.p_flow << '|' << fmt_double(c.gamma_flow)
     << '|' << fmt_double(c.stopping_c) << '|' << fmt_double(c.bp_tol) << '|'
     << fmt_double(c.step_eps) << '|' << c.record_stride << '|' << c.max_steps;
  for (double g : c.effective_gammas()) os << '|' << fmt_double(g);
  for (auto e : c.effective_ensembles()) os << '|' << to_string(e);
  return hash_string(0x1a6, os.str());
}

// ---------------------------------------------------------------------------
// Interpolation setups (S1-S3): per trial solve the l1 interpolant (plus the
// min-l2 baseline outside S2) and record excess risk and ||beta||_inf. Below
// the interpolation threshold (p <= n) both estimators coincide with least
// squares; that convention gives the sub-critical branch of the S3 phase plot.
// ---------------------------------------------------------------------------

struct InterpTrialOut {
  bool ok = false;
  std::string error;
  double risk_l1 = 0.0, linf_l1 = 0.0;
  double risk_l2 = 0.0, linf_l2 = 0.0;
};

InterpTrialOut interp_trial(const ExperimentConfig& cfg, const CovarianceSpec& cov,
                            Ensemble ensemble, std::uint64_t stream_id, bool want_l2) {
  InterpTrialOut out;
  const RngStream stream{cfg.base_seed, stream_id};
  const Dataset ds = generate_dataset(cov, SignalSpec{}, cfg.n, cfg.sigma2, ensemble, stream);

  if (ds.p() <= ds.n()) {
    const Eigen::VectorXd beta = least_squares_fit(ds);
    out.risk_l1 = out.risk_l2 = excess_risk(beta, ds);
    out.linf_l1 = out.linf_l2 = beta.cwiseAbs().maxCoeff();
    out.ok = true;
    return out;
  }

  const auto bp = basis_pursuit(ds, cfg.bp_tol);
  out.risk_l1 = excess_risk(bp.beta, ds);
  out.linf_l1 = bp.beta.cwiseAbs().maxCoeff();
  if (want_l2) {
    const auto l2 = min_l2_interpolant(ds);
    out.risk_l2 = excess_risk(l2.beta, ds);
    out.linf_l2 = l2.beta.cwiseAbs().maxCoeff();
  }
  out.ok = true;
  return out;
}

struct FlowTrialOut {
  StoppingTrial rec;
  BoostingTrajectory traj;
};

FlowTrialOut flow_trial(const ExperimentConfig& cfg, std::uint64_t stream_id, std::size_t trial) {
  FlowTrialOut out;
  out.rec.trial = trial;

  const std::size_t p = cfg.p_flow ? cfg.p_flow
                                   : static_cast<std::size_t>(std::llround(
                                         cfg.gamma_flow * static_cast<double>(cfg.n)));
  const auto cov = build_covariance(CovKind::Isotropic, p, 0, 0.0, 1.0);
  const RngStream stream{cfg.base_seed, stream_id};
  const Dataset raw = generate_dataset(cov, SignalSpec{cfg.signal_support, cfg.signal_magnitude},
                                       cfg.n, cfg.sigma2, Ensemble::Gaussian, stream);
  const Dataset ds = column_normalize(raw);

  const double sigma = std::sqrt(cfg.sigma2);
  const auto oracle = oracle_threshold(sigma, p, cfg.n, cfg.stopping_c);
  StoppingRule rule = oracle;
  if (cfg.setup == Setup::S5) {
    rule = adaptive_threshold(ds, stream.derive(0xADA), cfg.stopping_c);
    out.rec.sigma2_hat = rule.sigma * rule.sigma;
    out.rec.rel_threshold_gap = std::abs(rule.lambda_n - oracle.lambda_n) / oracle.lambda_n;
  }
  out.rec.lambda_n = oracle.lambda_n;
  out.rec.threshold = rule.threshold;

  FlowConfig fc;
  fc.step_eps = cfg.step_eps;
  fc.record_stride = cfg.record_stride;
  fc.max_steps = cfg.max_steps;
  fc.run_past_stop = true;
  const auto traj = run_flow(ds, fc, rule);

  out.rec.crossed = traj.crossed;
  out.rec.t_star_step = traj.t_star_step;
  out.rec.max_recorded_rho_increase = traj.max_recorded_rho_increase;
  out.rec.risk_at_stop = excess_risk(traj.beta_at_stop, ds);
  out.rec.min_path_risk = traj.risk[traj.min_risk_index];
  out.rec.final_risk = traj.risk.back();
  if (traj.t_star_index) out.rec.rho_at_stop = traj.rho[*traj.t_star_index];
  out.rec.u_shaped = out.rec.min_path_risk < traj.risk.front() &&
                     out.rec.min_path_risk < out.rec.final_risk;

  // Noise event and basic inequality, both in the normalized coordinates the
  // stopping theory is stated in, with the oracle noise floor.
  const Eigen::VectorXd eps_vec = ds.noise();
  const double dn = static_cast<double>(ds.n());
  const double xi_inf = (ds.phi.transpose() * eps_vec / dn).cwiseAbs().maxCoeff();
  out.rec.noise_event = xi_inf <= oracle.lambda_n;
  const Eigen::VectorXd err = traj.beta_at_stop - ds.beta_star;
  out.rec.pred_error = (ds.phi * err).squaredNorm() / dn;
  out.rec.l1_error = err.lpNorm<1>();
  out.rec.basic_inequality_ok =
      out.rec.pred_error <= 3.0 * oracle.lambda_n * out.rec.l1_error * (1.0 + 1e-12);
  const double bstar_l1 = ds.beta_star.lpNorm<1>();
  out.rec.l1_ratio = bstar_l1 > 0 ? traj.beta_at_stop.lpNorm<1>() / bstar_l1 : 0.0;

  if (cfg.setup == Setup::S5) {
    // Stride-granular oracle crossing, for comparing stop times.
    for (std::size_t k = 0; k < traj.rho.size(); ++k) {
      if (traj.rho[k] <= oracle.threshold) {
        out.rec.t_star_oracle_step = traj.steps[k];
        break;
      }
    }
  }

  // LassoCV baseline.
  const auto cv = lasso_cv(ds);
  out.rec.lasso_cv_risk = excess_risk(cv.beta_opt, ds);

  // 5-fold CV stopping: fold flows share the full run's step size and stride;
  // held-out MSE is evaluated at the shared record steps.
  {
    const std::size_t n_folds = 5;
    const std::size_t full_last = traj.steps.back();
    std::size_t fold_cap = full_last;
    if (traj.crossed && traj.t_star_step > 0) {
      fold_cap = std::min<std::size_t>(full_last, (traj.t_star_step * 3) / 2);
    }
    FlowConfig fold_cfg;
    fold_cfg.step_eps = traj.step_eps;
    fold_cfg.record_stride = cfg.record_stride;
    fold_cfg.max_steps = fold_cap;

    std::vector<std::vector<double>> fold_mse(n_folds);
    std::vector<std::vector<std::size_t>> fold_steps(n_folds);
    const Eigen::Index n = ds.n();
    for (std::size_t f = 0; f < n_folds; ++f) {
      const Eigen::Index lo = static_cast<Eigen::Index>(f * static_cast<std::size_t>(n) / n_folds);
      const Eigen::Index hi =
          static_cast<Eigen::Index>((f + 1) * static_cast<std::size_t>(n) / n_folds);
      Dataset train = ds;
      const Eigen::Index n_tr = n - (hi - lo);
      train.phi.resize(n_tr, ds.p());
      train.y.resize(n_tr);
      train.phi.topRows(lo) = ds.phi.topRows(lo);
      train.y.head(lo) = ds.y.head(lo);
      train.phi.bottomRows(n - hi) = ds.phi.bottomRows(n - hi);
      train.y.tail(n - hi) = ds.y.tail(n - hi);
      const auto val_phi = ds.phi.middleRows(lo, hi - lo);
      const auto val_y = ds.y.segment(lo, hi - lo);

      auto& mse = fold_mse[f];
      auto& steps = fold_steps[f];
      run_flow(train, fold_cfg, std::nullopt,
               [&](std::size_t step, const Eigen::VectorXd& beta) {
                 steps.push_back(step);
                 mse.push_back((val_y - val_phi * beta).squaredNorm() /
                               static_cast<double>(hi - lo));
               });
    }
    std::size_t common = fold_mse[0].size();
    for (const auto& m : fold_mse) common = std::min(common, m.size());
    std::size_t best = 0;
    double best_val = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < common; ++k) {
      double acc = 0.0;
      for (std::size_t f = 0; f < n_folds; ++f) acc += fold_mse[f][k];
      if (acc < best_val) {
        best_val = acc;
        best = k;
      }
    }
    out.rec.cv_stop_step = fold_steps[0].empty() ? 0 : fold_steps[0][best];
    // Full-data flow risk at the chosen shared step.
    out.rec.risk_at_cv_stop = traj.risk.back();
    for (std::size_t k = 0; k < traj.steps.size(); ++k) {
      if (traj.steps[k] >= out.rec.cv_stop_step) {
        out.rec.risk_at_cv_stop = traj.risk[k];
        break;
      }
    }
  }

  out.rec.ok = true;
  out.traj = traj;
  return out;
}

}  // namespace

RegressionFit fit_rate(const std::vector<Cell>& cells, const std::string& estimator,
                       const std::string& ensemble, double min_gamma) {
  std::vector<double> xs, ys;
  for (const auto& c : cells) {
    if (c.estimator != estimator || c.ensemble != ensemble) continue;
    if (c.gamma < min_gamma) continue;
    if (!(c.gamma > 1.0)) continue;  // 1/log(gamma) undefined at gamma <= 1
    xs.push_back(1.0 / std::log(c.gamma));
    ys.push_back(c.mean_risk);
  }
  if (xs.size() < 3) {
    throw std::invalid_argument("fit_rate: need at least 3 gamma points for " + estimator);
  }
  return simple_ols(xs, ys);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  ExperimentResult result;
  result.setup = config.setup;
  result.config = config;
  result.config_hash = config_hash(config);

  const auto gammas = config.effective_gammas();
  const auto ensembles = config.effective_ensembles();
  const bool flow_setup = config.setup == Setup::S4 || config.setup == Setup::S5;

  if (!flow_setup) {
    const bool want_l2 = config.setup != Setup::S2;

    struct CellPlan {
      std::size_t ensemble_idx, gamma_idx;
      CovarianceSpec cov;
      double realized_gamma;
      std::size_t p;
    };
    std::vector<CellPlan> plans;
    for (std::size_t ei = 0; ei < ensembles.size(); ++ei) {
      for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
        CellPlan plan;
        plan.ensemble_idx = ei;
        plan.gamma_idx = gi;
        if (config.setup == Setup::S3) {
          const auto tail = static_cast<std::size_t>(
              std::llround(gammas[gi] * static_cast<double>(config.n)));
          plan.p = config.k_star + tail;
          plan.cov = build_covariance(CovKind::SpikedIsotropic, plan.p, config.k_star,
                                      config.lambda_head, config.lambda_tail);
          plan.realized_gamma = static_cast<double>(tail) / static_cast<double>(config.n);
        } else {
          plan.p = static_cast<std::size_t>(std::llround(gammas[gi] * static_cast<double>(config.n)));
          plan.cov = build_covariance(CovKind::Isotropic, plan.p, 0, 0.0, 1.0);
          plan.realized_gamma = static_cast<double>(plan.p) / static_cast<double>(config.n);
        }
        plans.push_back(std::move(plan));
      }
    }

    std::vector<std::vector<InterpTrialOut>> slots(plans.size());
    for (auto& s : slots) s.resize(config.trials);

    const std::size_t total = plans.size() * config.trials;
    parallel_for(total, config.threads, [&](std::size_t idx) {
      const std::size_t pi = idx / config.trials;
      const std::size_t t = idx % config.trials;
      const auto& plan = plans[pi];
      const std::uint64_t sid =
          trial_stream_id(config.setup, plan.ensemble_idx, plan.gamma_idx, t);
      auto& slot = slots[pi][t];
      try {
        slot = interp_trial(config, plan.cov, ensembles[plan.ensemble_idx], sid, want_l2);
      } catch (const std::exception& e1) {
        try {
          slot = interp_trial(config, plan.cov, ensembles[plan.ensemble_idx],
                              sid + (1ull << 63), want_l2);
        } catch (const std::exception& e2) {
          slot.ok = false;
          slot.error = std::string(e1.what()) + " | retry: " + e2.what();
        }
      }
    });

    for (std::size_t pi = 0; pi < plans.size(); ++pi) {
      const auto& plan = plans[pi];
      std::vector<double> r1, l1v, r2, l2v;
      std::size_t failed = 0;
      for (std::size_t t = 0; t < config.trials; ++t) {
        const auto& s = slots[pi][t];
        if (!s.ok) {
          ++failed;
          std::cerr << "warning: trial " << t << " failed for gamma " << plan.realized_gamma
                    << ": " << s.error << "\n";
          continue;
        }
        r1.push_back(s.risk_l1);
        l1v.push_back(s.linf_l1);
        if (want_l2) {
          r2.push_back(s.risk_l2);
          l2v.push_back(s.linf_l2);
        }
      }
      result.failed_trials += failed;
      const bool incomplete = failed * 10 > config.trials;

      auto push_cell = [&](const std::string& est, const std::vector<double>& risks,
                           const std::vector<double>& linfs) {
        Cell cell;
        cell.estimator = est;
        cell.ensemble = to_string(ensembles[plan.ensemble_idx]);
        cell.gamma = plan.realized_gamma;
        cell.n = config.n;
        cell.p = plan.p;
        cell.trials = risks.size();
        cell.incomplete = incomplete;
        if (!risks.empty()) {
          double m = 0.0, ml = 0.0;
          for (double x : risks) m += x;
          m /= static_cast<double>(risks.size());
          for (double x : linfs) ml += x;
          ml /= static_cast<double>(linfs.size());
          cell.mean_risk = m;
          cell.std_risk = sample_std(risks, m);
          cell.mean_linf = ml;
        }
        result.cells.push_back(std::move(cell));
      };
      push_cell("l1", r1, l1v);
      if (want_l2) push_cell("l2", r2, l2v);
    }

    // Rate fits per estimator/ensemble; S3 regresses only the benign regime.
    const double min_gamma = config.setup == Setup::S3 ? 1.5 : 0.0;
    for (std::size_t ei = 0; ei < ensembles.size(); ++ei) {
      const std::string ens = to_string(ensembles[ei]);
      const std::vector<std::string> estimators =
          want_l2 ? std::vector<std::string>{"l1", "l2"} : std::vector<std::string>{"l1"};
      for (const auto& est : estimators) {
        try {
          result.fits.push_back({est, ens, fit_rate(result.cells, est, ens, min_gamma)});
        } catch (const std::exception&) {
          // fewer than 3 usable points; fit omitted
        }
      }
    }

    // Theory column.
    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      const auto& plan = plans[gi];  // gamma layout identical across ensembles
      try {
        if (config.setup == Setup::S3) {
          const auto cal = solve_spiked(plan.cov, config.n, config.sigma2);
          result.theory.push_back({plan.realized_gamma, cal.e_total});
        } else {
          const auto cal = solve_isotropic(plan.realized_gamma, config.sigma2);
          result.theory.push_back({plan.realized_gamma, cal.alpha2});
        }
      } catch (const std::exception&) {
        // sub-critical or near-critical point; no prediction there
      }
    }
    return result;
  }

  // Flow setups (S4/S5).
  std::vector<FlowTrialOut> slots(config.trials);
  parallel_for(config.trials, config.threads, [&](std::size_t t) {
    const std::uint64_t sid = trial_stream_id(config.setup, 0, 0, t);
    try {
      slots[t] = flow_trial(config, sid, t);
      slots[t].rec.trial = t;
    } catch (const std::exception& e1) {
      try {
        slots[t] = flow_trial(config, sid + (1ull << 63), t);
        slots[t].rec.trial = t;
      } catch (const std::exception& e2) {
        slots[t].rec.ok = false;
        slots[t].rec.trial = t;
        slots[t].rec.error = std::string(e1.what()) + " | retry: " + e2.what();
      }
    }
  });

  std::vector<double> stop_risk, min_risk, cv_risk, lasso_risk, final_risk, stop_linf, min_linf;
  for (auto& s : slots) {
    if (!s.rec.ok) {
      ++result.failed_trials;
      std::cerr << "warning: flow trial " << s.rec.trial << " failed: " << s.rec.error << "\n";
      result.stopping.push_back(s.rec);
      continue;
    }
    stop_risk.push_back(s.rec.risk_at_stop);
    min_risk.push_back(s.rec.min_path_risk);
    cv_risk.push_back(s.rec.risk_at_cv_stop);
    lasso_risk.push_back(s.rec.lasso_cv_risk);
    final_risk.push_back(s.rec.final_risk);
    stop_linf.push_back(s.traj.beta_at_stop.cwiseAbs().maxCoeff());
    min_linf.push_back(s.traj.beta_min_risk.size() ? s.traj.beta_min_risk.cwiseAbs().maxCoeff()
                                                   : 0.0);
    result.stopping.push_back(s.rec);
    result.trajectories.push_back(std::move(s.traj));
  }

  const std::size_t done = stop_risk.size();
  const bool incomplete = result.failed_trials * 10 > config.trials;
  const std::size_t p = config.p_flow ? config.p_flow
                                      : static_cast<std::size_t>(std::llround(
                                            config.gamma_flow * static_cast<double>(config.n)));
  const double realized_gamma = static_cast<double>(p) / static_cast<double>(config.n);

  auto push_flow_cell = [&](const std::string& est, const std::vector<double>& risks,
                            const std::vector<double>& linfs) {
    Cell cell;
    cell.estimator = est;
    cell.ensemble = to_string(Ensemble::Gaussian);
    cell.gamma = realized_gamma;
    cell.n = config.n;
    cell.p = p;
    cell.trials = done;
    cell.incomplete = incomplete;
    if (!risks.empty()) {
      double m = 0.0;
      for (double x : risks) m += x;
      m /= static_cast<double>(risks.size());
      cell.mean_risk = m;
      cell.std_risk = sample_std(risks, m);
      if (!linfs.empty()) {
        double ml = 0.0;
        for (double x : linfs) ml += x;
        cell.mean_linf = ml / static_cast<double>(linfs.size());
      }
    }
    result.cells.push_back(std::move(cell));
  };
  push_flow_cell("flow_stop", stop_risk, stop_linf);
  push_flow_cell("flow_min_path", min_risk, min_linf);
  push_flow_cell("flow_cv_stop", cv_risk, {});
  push_flow_cell("lasso_cv", lasso_risk, {});
  push_flow_cell("flow_final", final_risk, {});
  return result;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

std::string cells_to_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << "setup,gamma,n,p,estimator,ensemble,mean_risk,std_risk,mean_linf,trials\n";
  for (const auto& c : result.cells) {
    os << to_string(result.setup) << ',' << fmt_double(c.gamma) << ',' << c.n << ',' << c.p << ','
       << c.estimator << ',' << c.ensemble << ',' << fmt_double(c.mean_risk) << ','
       << fmt_double(c.std_risk) << ',' << fmt_double(c.mean_linf) << ',' << c.trials << '\n';
  }
  return os.str();
}

std::string summary_to_json(const ExperimentResult& result) {
  nlohmann::json j;
  const auto& c = result.config;
  j["setup"] = to_string(result.setup);
  j["config"] = {{"n", c.n},
                 {"trials", c.trials},
                 {"sigma2", c.sigma2},
                 {"base_seed", c.base_seed},
                 {"gammas", c.effective_gammas()},
                 {"k_star", c.k_star},
                 {"lambda_head", c.lambda_head},
                 {"lambda_tail", c.lambda_tail},
                 {"signal_support", c.signal_support},
                 {"signal_magnitude", c.signal_magnitude},
                 {"p_flow", c.p_flow},
                 {"gamma_flow", c.gamma_flow},
                 {"stopping_c", c.stopping_c},
                 {"bp_tol", c.bp_tol},
                 {"step_eps", c.step_eps},
                 {"record_stride", c.record_stride},
                 {"max_steps", c.max_steps}};
  {
    std::vector<std::string> ens;
    for (auto e : c.effective_ensembles()) ens.emplace_back(to_string(e));
    j["config"]["ensembles"] = ens;
  }
  j["config_hash"] = result.config_hash;
  j["failed_trials"] = result.failed_trials;

  j["cells"] = nlohmann::json::array();
  for (const auto& cell : result.cells) {
    j["cells"].push_back({{"estimator", cell.estimator},
                          {"ensemble", cell.ensemble},
                          {"gamma", cell.gamma},
                          {"n", cell.n},
                          {"p", cell.p},
                          {"mean_risk", cell.mean_risk},
                          {"std_risk", cell.std_risk},
                          {"mean_linf", cell.mean_linf},
                          {"trials", cell.trials},
                          {"incomplete", cell.incomplete}});
  }

  j["fits"] = nlohmann::json::array();
  for (const auto& f : result.fits) {
    j["fits"].push_back({{"estimator", f.estimator},
                         {"ensemble", f.ensemble},
                         {"intercept", f.fit.intercept},
                         {"slope", f.fit.slope},
                         {"r_squared", f.fit.r_squared},
                         {"n_points", f.fit.n_points},
                         {"constant_response", f.fit.constant_response}});
  }

  j["theory"] = nlohmann::json::array();
  for (const auto& t : result.theory) {
    j["theory"].push_back({{"gamma", t.gamma}, {"predicted_risk", t.predicted}});
  }

  if (!result.stopping.empty()) {
    auto trials = nlohmann::json::array();
    for (const auto& s : result.stopping) {
      trials.push_back({{"trial", s.trial},
                        {"ok", s.ok},
                        {"risk_at_stop", s.risk_at_stop},
                        {"min_path_risk", s.min_path_risk},
                        {"final_risk", s.final_risk},
                        {"risk_at_cv_stop", s.risk_at_cv_stop},
                        {"lasso_cv_risk", s.lasso_cv_risk},
                        {"t_star_step", s.t_star_step},
                        {"cv_stop_step", s.cv_stop_step},
                        {"threshold", s.threshold},
                        {"lambda_n", s.lambda_n},
                        {"crossed", s.crossed},
                        {"u_shaped", s.u_shaped},
                        {"noise_event", s.noise_event},
                        {"basic_inequality_ok", s.basic_inequality_ok},
                        {"pred_error", s.pred_error},
                        {"l1_error", s.l1_error},
                        {"l1_ratio", s.l1_ratio},
                        {"sigma2_hat", s.sigma2_hat},
                        {"rel_threshold_gap", s.rel_threshold_gap},
                        {"t_star_oracle_step", s.t_star_oracle_step}});
    }
    j["stopping_trials"] = std::move(trials);
  }
  return j.dump(2) + "\n";
}

namespace {

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> pts;
};

std::string render_svg(const std::vector<Series>& series, const std::string& x_label,
                       const std::string& y_label) {
  const double W = 720, H = 480, ml = 70, mr = 160, mt = 24, mb = 56;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series) {
    for (auto [x, y] : s.pts) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!(xmax > xmin)) xmax = xmin + 1.0;
  if (!(ymax > ymin)) ymax = ymin + 1.0;
  const double yspan = ymax - ymin;
  ymin = std::max(0.0, ymin - 0.05 * yspan);
  ymax += 0.05 * yspan;

  auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (W - ml - mr); };
  auto py = [&](double y) { return H - mb - (y - ymin) / (ymax - ymin) * (H - mt - mb); };

  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  std::ostringstream os;
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
     << "' stroke='black'/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double fx = xmin + (xmax - xmin) * k / 5.0;
    const double fy = ymin + (ymax - ymin) * k / 5.0;
    os << "<line x1='" << px(fx) << "' y1='" << H - mb << "' x2='" << px(fx) << "' y2='"
       << H - mb + 5 << "' stroke='black'/>\n";
    os << "<text x='" << px(fx) << "' y='" << H - mb + 20
       << "' font-size='11' text-anchor='middle'>" << fmt_double(fx) << "</text>\n";
    os << "<line x1='" << ml - 5 << "' y1='" << py(fy) << "' x2='" << ml << "' y2='" << py(fy)
       << "' stroke='black'/>\n";
    os << "<text x='" << ml - 8 << "' y='" << py(fy) + 4
       << "' font-size='11' text-anchor='end'>" << fmt_double(fy) << "</text>\n";
  }
  os << "<text x='" << (ml + W - mr) / 2 << "' y='" << H - 12
     << "' font-size='13' text-anchor='middle'>" << x_label << "</text>\n";
  os << "<text x='16' y='" << (mt + H - mb) / 2
     << "' font-size='13' text-anchor='middle' transform='rotate(-90 16 " << (mt + H - mb) / 2
     << ")'>" << y_label << "</text>\n";

  std::size_t si = 0;
  for (const auto& s : series) {
    const char* color = palette[si % 6];
    os << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (auto [x, y] : s.pts) os << px(x) << ',' << py(y) << ' ';
    os << "'/>\n";
    os << "<text x='" << W - mr + 10 << "' y='" << mt + 16 + 18 * si << "' font-size='12' fill='"
       << color << "'>" << s.label << "</text>\n";
    ++si;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace

std::string cells_to_svg(const std::vector<Cell>& cells, bool inverse_log_axis) {
  std::vector<Series> series;
  for (const auto& c : cells) {
    if (inverse_log_axis && !(c.gamma > 1.0)) continue;
    const std::string label = c.estimator + "/" + c.ensemble;
    auto it = std::find_if(series.begin(), series.end(),
                           [&](const Series& s) { return s.label == label; });
    if (it == series.end()) {
      series.push_back({label, {}});
      it = series.end() - 1;
    }
    const double x = inverse_log_axis ? 1.0 / std::log(c.gamma) : c.gamma;
    it->pts.emplace_back(x, c.mean_risk);
  }
  for (auto& s : series) {
    std::sort(s.pts.begin(), s.pts.end());
  }
  return render_svg(series, inverse_log_axis ? "1/log(gamma)" : "gamma", "mean excess risk");
}

void emit_outputs(const ExperimentResult& result, const ExperimentConfig& config) {
  namespace fs = std::filesystem;
  if (config.out_dir.empty()) throw InvalidSpecError("emit_outputs: out_dir is empty");
  std::error_code ec;
  fs::create_directories(config.out_dir, ec);
  if (ec) throw std::runtime_error("emit_outputs: cannot create " + config.out_dir);

  write_text_file(config.out_dir + "/cells.csv", cells_to_csv(result));
  write_text_file(config.out_dir + "/summary.json", summary_to_json(result));

  if (!result.trajectories.empty()) {
    const std::string tdir = config.out_dir + "/trajectories";
    fs::create_directories(tdir, ec);
    for (std::size_t i = 0; i < result.trajectories.size(); ++i) {
      const std::size_t trial = i < result.stopping.size() ? result.stopping[i].trial : i;
      write_text_file(tdir + "/trial_" + std::to_string(trial) + ".csv",
                      trajectory_to_csv(result.trajectories[i]));
    }
  }
  if (config.emit_svg) {
    write_text_file(config.out_dir + "/risk_vs_gamma.svg", cells_to_svg(result.cells, false));
    write_text_file(config.out_dir + "/risk_vs_invlog.svg", cells_to_svg(result.cells, true));
  }
}

}  // namespace ilab
