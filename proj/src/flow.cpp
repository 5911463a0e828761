#include "ilab/flow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ilab/errors.hpp"
#include "ilab/interpolants.hpp"
#include "ilab/stats.hpp"

namespace ilab {

Eigen::VectorXd negative_gradient(const Dataset& dataset, const Eigen::VectorXd& beta) {
  if (beta.size() != dataset.p()) {
    throw std::invalid_argument("negative_gradient: dimension mismatch");
  }
  return dataset.phi.transpose() * (dataset.y - dataset.phi * beta) /
         static_cast<double>(dataset.n());
}

StoppingRule oracle_threshold(double sigma, std::size_t p, std::size_t n, double c) {
  if (!(c > 1.0)) throw std::domain_error("oracle_threshold: requires c > 1");
  if (!(sigma > 0.0)) throw std::domain_error("oracle_threshold: requires sigma > 0");
  if (p < 2 || n < 1) throw std::domain_error("oracle_threshold: requires p >= 2, n >= 1");
  StoppingRule rule;
  rule.kind = StoppingKind::Oracle;
  rule.sigma = sigma;
  rule.c = c;
  rule.lambda_n = sigma * std::sqrt(2.0 * c * std::log(static_cast<double>(p)) /
                                    static_cast<double>(n));
  rule.threshold = 2.0 * rule.lambda_n;
  return rule;
}

BoostingTrajectory run_flow(const Dataset& dataset, const FlowConfig& config,
                            const std::optional<StoppingRule>& rule,
                            const FlowRecordCallback& on_record) {
  if (config.record_stride < 1) throw std::invalid_argument("run_flow: record_stride < 1");
  if (config.step_eps < 0.0) throw std::invalid_argument("run_flow: step_eps < 0");
  if (rule && !(rule->c > 1.0 && rule->lambda_n > 0.0)) {
    throw std::invalid_argument("run_flow: invalid stopping rule");
  }

  const auto& X = dataset.phi;
  const auto& y = dataset.y;
  const Eigen::Index n = dataset.n();
  const Eigen::Index p = dataset.p();
  const double dn = static_cast<double>(n);

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y;
  Eigen::VectorXd g = X.transpose() * r / dn;

  double gmax_col = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    gmax_col = std::max(gmax_col, X.col(j).squaredNorm() / dn);
  }

  BoostingTrajectory traj;
  traj.rho0 = g.size() ? g.cwiseAbs().maxCoeff() : 0.0;
  const double eps = config.step_eps > 0.0
                         ? config.step_eps
                         : (gmax_col > 0.0 ? 0.002 * traj.rho0 / gmax_col : 0.0);
  traj.step_eps = eps;

  const std::optional<double> threshold =
      rule ? std::optional<double>(rule->threshold) : config.stop_threshold;
  const double feas_floor = 1e-12 * traj.rho0;
  double l1 = 0.0;

  auto record = [&](std::size_t step, double rho_now) {
    traj.steps.push_back(step);
    traj.times.push_back(static_cast<double>(step) * eps);
    traj.rho.push_back(rho_now);
    traj.l1_norm.push_back(l1);
    const double risk_now = excess_risk(beta, dataset);
    traj.risk.push_back(risk_now);
    traj.stopped_flag.push_back(traj.crossed ? 1 : 0);
    const std::size_t k = traj.rho.size();
    if (k >= 2) {
      traj.max_recorded_rho_increase =
          std::max(traj.max_recorded_rho_increase, traj.rho[k - 1] - traj.rho[k - 2]);
    }
    if (k == 1 || risk_now < traj.risk[traj.min_risk_index]) {
      traj.min_risk_index = k - 1;
      traj.beta_min_risk = beta;
    }
    if (on_record) on_record(step, beta);
  };

  double rho = traj.rho0;
  record(0, rho);

  if (threshold && rho <= *threshold) {
    // The initial correlation already sits at the noise floor: t* = 0, flagged.
    traj.crossed = true;
    traj.started_below_threshold = true;
    traj.t_star_index = 0;
    traj.t_star_step = 0;
    traj.beta_at_stop = beta;
    traj.stopped_flag.back() = 1;
    if (!config.run_past_stop) {
      traj.beta_final = beta;
      return traj;
    }
  }
  if (rho <= feas_floor || eps == 0.0 || config.max_steps == 0) {
    traj.beta_final = beta;
    traj.beta_at_stop = beta;
    return traj;
  }

  const std::size_t refresh_every = 1000;
  for (std::size_t step = 1; step <= config.max_steps; ++step) {
    Eigen::Index jstar = 0;
    g.cwiseAbs().maxCoeff(&jstar);  // first maximizer = lowest index on ties
    const double s = g(jstar) > 0.0 ? 1.0 : -1.0;

    const double old = beta(jstar);
    beta(jstar) = old + eps * s;
    l1 += std::abs(beta(jstar)) - std::abs(old);

    r -= (eps * s) * X.col(jstar);
    g -= (eps * s / dn) * (X.transpose() * X.col(jstar));
    if (step % refresh_every == 0) {
      r = y - X * beta;
      g = X.transpose() * r / dn;
    }
    rho = g.cwiseAbs().maxCoeff();

    bool crossing_now = false;
    if (threshold && !traj.crossed && rho <= *threshold) {
      traj.crossed = true;
      crossing_now = true;
      traj.t_star_step = step;
      traj.beta_at_stop = beta;
    }

    const bool due = (step % config.record_stride == 0) || crossing_now;
    const bool stopping = (traj.crossed && !config.run_past_stop) ||
                          (rho <= feas_floor) ||
                          (traj.crossed && config.run_past_stop && threshold &&
                           rho <= config.past_stop_floor_frac * *threshold) ||
                          (step == config.max_steps);
    if (due || stopping) {
      record(step, rho);
      if (crossing_now) traj.t_star_index = traj.rho.size() - 1;
    }
    if (stopping) break;
  }

  if (traj.max_recorded_rho_increase > 1e-6) {
    std::ostringstream msg;
    msg << "run_flow: recorded rho increased by " << traj.max_recorded_rho_increase
        << " (step too large); retry with eps = " << eps / 10.0;
    throw FlowStepError(msg.str(), eps / 10.0);
  }

  traj.beta_final = beta;
  if (!traj.crossed) traj.beta_at_stop = beta;
  return traj;
}

namespace {

Dataset take_rows(const Dataset& ds, Eigen::Index lo, Eigen::Index hi) {
  Dataset out = ds;
  out.phi = ds.phi.middleRows(lo, hi - lo).eval();
  out.y = ds.y.segment(lo, hi - lo).eval();
  return out;
}

// One RCV direction: select on the selection half, refit on the refit half.
double rcv_half(const Dataset& select_half, const Dataset& refit_half, std::size_t* support_size,
                bool* cap_hit) {
  const double dn1 = static_cast<double>(select_half.n());
  const auto p = select_half.p();

  const double mean_y = select_half.y.mean();
  const double var_y =
      (select_half.y.array() - mean_y).square().sum() / std::max(1.0, dn1 - 1.0);
  const double lambda = std::sqrt(var_y) *
                        std::sqrt(2.0 * 1.1 * std::log(static_cast<double>(p)) / dn1);

  auto fit = lasso_coordinate_descent(select_half, lambda, 1e-6, 5000);

  std::vector<std::pair<double, Eigen::Index>> nz;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (fit.beta(j) != 0.0) nz.emplace_back(std::abs(fit.beta(j)), j);
  }
  const std::size_t cap = static_cast<std::size_t>(select_half.n()) / 4;
  if (nz.size() > cap) {
    *cap_hit = true;
    std::sort(nz.begin(), nz.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    nz.resize(cap);
  }
  std::vector<Eigen::Index> support;
  support.reserve(nz.size());
  for (const auto& [mag, j] : nz) support.push_back(j);
  std::sort(support.begin(), support.end());
  *support_size = support.size();

  const Eigen::Index n2 = refit_half.n();
  if (support.empty()) {
    return refit_half.y.squaredNorm() / static_cast<double>(n2);
  }
  if (static_cast<Eigen::Index>(support.size()) >= n2) {
    throw SolverError("rcv_variance_estimate: selected support exceeds refit half");
  }

  Eigen::MatrixXd Xs(n2, static_cast<Eigen::Index>(support.size()));
  for (std::size_t i = 0; i < support.size(); ++i) Xs.col(static_cast<Eigen::Index>(i)) = refit_half.phi.col(support[i]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xs);
  if (qr.rank() < static_cast<Eigen::Index>(support.size())) {
    throw SolverError("rcv_variance_estimate: singular restricted Gram in refit");
  }
  const Eigen::VectorXd bs = qr.solve(refit_half.y);
  const double rss = (refit_half.y - Xs * bs).squaredNorm();
  return rss / static_cast<double>(n2 - static_cast<Eigen::Index>(support.size()));
}

}  // namespace

RcvEstimate rcv_variance_estimate(const Dataset& dataset, const RngStream& /*stream*/) {
  const Eigen::Index n = dataset.n();
  if (n < 40) throw std::invalid_argument("rcv_variance_estimate: requires n >= 40");
  const Eigen::Index half = n / 2;

  const Dataset first = take_rows(dataset, 0, half);
  const Dataset second = take_rows(dataset, half, n);

  RcvEstimate est;
  est.sigma2_half1 = rcv_half(first, second, &est.support1, &est.cap_hit);
  est.sigma2_half2 = rcv_half(second, first, &est.support2, &est.cap_hit);
  est.sigma2_hat = 0.5 * (est.sigma2_half1 + est.sigma2_half2);
  return est;
}

StoppingRule adaptive_threshold(const Dataset& dataset, const RngStream& stream, double c) {
  const auto est = rcv_variance_estimate(dataset, stream);
  if (!(est.sigma2_hat > 0.0)) {
    throw SolverError("adaptive_threshold: nonpositive variance estimate", est.sigma2_hat);
  }
  auto rule = oracle_threshold(std::sqrt(est.sigma2_hat), static_cast<std::size_t>(dataset.p()),
                               static_cast<std::size_t>(dataset.n()), c);
  rule.kind = StoppingKind::Adaptive;
  return rule;
}

}  // namespace ilab
