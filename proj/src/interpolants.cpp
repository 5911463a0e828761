#include "ilab/interpolants.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "ilab/errors.hpp"
#include "ilab/stats.hpp"

namespace ilab {

namespace {

double linf(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

InterpolantSolution zero_solution(Eigen::Index p) {
  InterpolantSolution sol;
  sol.beta = Eigen::VectorXd::Zero(p);
  return sol;
}

}  // namespace

InterpolantSolution min_l2_interpolant(const Dataset& dataset) {
  const auto n = dataset.n();
  const auto p = dataset.p();
  if (p < n) throw SolverError("min_l2_interpolant: requires p >= n");
  if (linf(dataset.y) == 0.0) return zero_solution(p);

  Eigen::MatrixXd gram = dataset.phi * dataset.phi.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() != Eigen::Success) {
    throw SolverError("min_l2_interpolant: singular Gram matrix", llt.rcond());
  }
  InterpolantSolution sol;
  sol.beta = dataset.phi.transpose() * llt.solve(dataset.y);
  sol.objective = sol.beta.norm();
  sol.residual_inf = linf(dataset.y - dataset.phi * sol.beta);
  sol.solver_steps = 1;
  return sol;
}

Eigen::VectorXd least_squares_fit(const Dataset& dataset) {
  return dataset.phi.colPivHouseholderQr().solve(dataset.y);
}

// ---------------------------------------------------------------------------
// Basis pursuit via the lasso homotopy.
//
// The KKT system of (1/2n)||Y - Phi b||^2 + lambda ||b||_1 makes the solution
// piecewise linear in lambda: with active set A and signs z,
//   G_AA b_A = (1/n) Phi_A^T Y - lambda z,   G = (1/n) Phi^T Phi,
// so b_A moves along d = G_AA^{-1} z as lambda decreases. Off-active
// correlations c_j = (1/n) Phi_j^T r are affine in lambda with slope
// a_j = (1/n) Phi_j^T Phi_A d. Events: a coordinate hits |c_j| = lambda
// (entry), an active coefficient crosses zero (drop), or lambda reaches zero.
// Driving lambda to zero yields the interpolation limit, i.e. basis pursuit.
// ---------------------------------------------------------------------------

namespace {

class HomotopyState {
 public:
  HomotopyState(const Eigen::MatrixXd& X, Eigen::Index cap)
      : X_(X), n_(X.rows()), gram_(cap, cap), chol_(cap, cap) {}

  Eigen::Index size() const { return static_cast<Eigen::Index>(active_.size()); }
  const std::vector<int>& active() const { return active_; }
  const Eigen::VectorXd& signs() const { return z_; }
  Eigen::VectorXd& beta() { return beta_; }

  bool contains(int j) const {
    return std::find(active_.begin(), active_.end(), j) != active_.end();
  }

  void add(int j, double sign) {
    const Eigen::Index k = size();
    Eigen::VectorXd col(k + 1);
    for (Eigen::Index i = 0; i < k; ++i) {
      col(i) = X_.col(active_[static_cast<std::size_t>(i)]).dot(X_.col(j)) / static_cast<double>(n_);
    }
    col(k) = X_.col(j).squaredNorm() / static_cast<double>(n_);

    // Cholesky append: L w = v, new diagonal sqrt(g_jj - w.w).
    if (k > 0) {
      Eigen::VectorXd w =
          chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(col.head(k));
      const double d2 = col(k) - w.squaredNorm();
      if (!(d2 > 1e-13 * col(k))) {
        throw SolverError("basis_pursuit: degenerate entry (Gram nearly singular)", d2);
      }
      chol_.block(k, 0, 1, k) = w.transpose();
      chol_(k, k) = std::sqrt(d2);
    } else {
      if (!(col(0) > 0.0)) throw SolverError("basis_pursuit: zero column entered");
      chol_(0, 0) = std::sqrt(col(0));
    }
    gram_.block(0, k, k, 1) = col.head(k);
    gram_.block(k, 0, 1, k) = col.head(k).transpose();
    gram_(k, k) = col(k);

    active_.push_back(j);
    z_.conservativeResize(k + 1);
    z_(k) = sign;
    beta_.conservativeResize(k + 1);
    beta_(k) = 0.0;
  }

  void drop(Eigen::Index pos) {
    const Eigen::Index k = size();
    for (Eigen::Index i = pos; i + 1 < k; ++i) {
      active_[static_cast<std::size_t>(i)] = active_[static_cast<std::size_t>(i + 1)];
      z_(i) = z_(i + 1);
      beta_(i) = beta_(i + 1);
    }
    active_.pop_back();
    z_.conservativeResize(k - 1);
    beta_.conservativeResize(k - 1);

    // Shift the Gram down and refactor; drops are rare enough that a full
    // Cholesky is acceptable.
    const Eigen::Index m = k - 1;
    for (Eigen::Index r = pos; r < m; ++r) {
      for (Eigen::Index c = 0; c < k; ++c) gram_(r, c) = gram_(r + 1, c);
    }
    for (Eigen::Index c = pos; c < m; ++c) {
      for (Eigen::Index r = 0; r < m; ++r) gram_(r, c) = gram_(r, c + 1);
    }
    if (m > 0) {
      Eigen::LLT<Eigen::MatrixXd> llt(gram_.topLeftCorner(m, m));
      if (llt.info() != Eigen::Success) {
        throw SolverError("basis_pursuit: Gram refactorization failed after drop");
      }
      chol_.topLeftCorner(m, m) = llt.matrixL();
    }
  }

  // d solving G_AA d = rhs.
  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    const Eigen::Index k = size();
    Eigen::VectorXd d = chol_.topLeftCorner(k, k).triangularView<Eigen::Lower>().solve(rhs);
    chol_.topLeftCorner(k, k).transpose().triangularView<Eigen::Upper>().solveInPlace(d);
    return d;
  }

  Eigen::VectorXd direction() const { return solve(z_); }

 private:
  const Eigen::MatrixXd& X_;
  Eigen::Index n_;
  std::vector<int> active_;
  Eigen::VectorXd z_;
  Eigen::VectorXd beta_;
  Eigen::MatrixXd gram_;
  mutable Eigen::MatrixXd chol_;
};

}  // namespace

InterpolantSolution basis_pursuit(const Dataset& dataset, double tol) {
  const auto& X = dataset.phi;
  const auto& y = dataset.y;
  const Eigen::Index n = dataset.n();
  const Eigen::Index p = dataset.p();
  if (p <= n) throw SolverError("basis_pursuit: requires p > n");

  const double y_inf = linf(y);
  if (y_inf == 0.0) return zero_solution(p);
  const double feas = tol * y_inf;

  Eigen::VectorXd r = y;
  Eigen::VectorXd c = X.transpose() * r / static_cast<double>(n);
  double lambda = linf(c);
  const double lambda0 = lambda;
  if (lambda == 0.0) return zero_solution(p);

  HomotopyState state(X, n);
  std::vector<char> in_active(static_cast<std::size_t>(p), 0);
  {
    Eigen::Index j0 = 0;
    c.cwiseAbs().maxCoeff(&j0);
    state.add(static_cast<int>(j0), c(j0) > 0 ? 1.0 : -1.0);
    in_active[static_cast<std::size_t>(j0)] = 1;
  }

  enum class Event { ReachZero, Enter, Drop };
  const std::size_t max_events = static_cast<std::size_t>(40 * n + 400);
  std::size_t steps = 0;
  int last_dropped = -1;
  std::size_t stalls = 0;

  while (steps < max_events) {
    ++steps;
    const Eigen::Index k = state.size();
    Eigen::VectorXd d = state.direction();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < k; ++i) {
      u += d(i) * X.col(state.active()[static_cast<std::size_t>(i)]);
    }
    Eigen::VectorXd a = X.transpose() * u / static_cast<double>(n);

    double delta = lambda;
    Event ev = Event::ReachZero;
    int ev_j = -1;
    double ev_sign = 0.0;
    Eigen::Index ev_pos = -1;

    if (k < n) {
      for (Eigen::Index j = 0; j < p; ++j) {
        if (in_active[static_cast<std::size_t>(j)] || static_cast<int>(j) == last_dropped) continue;
        const double aj = a(j);
        const double cj = c(j);
        const double dp = 1.0 - aj;
        if (dp > 1e-12) {
          const double t = (lambda - cj) / dp;
          if (t > 1e-14 && t < delta * (1.0 - 1e-15)) {
            delta = t;
            ev = Event::Enter;
            ev_j = static_cast<int>(j);
            ev_sign = 1.0;
          }
        }
        const double dm = 1.0 + aj;
        if (dm > 1e-12) {
          const double t = (lambda + cj) / dm;
          if (t > 1e-14 && t < delta * (1.0 - 1e-15)) {
            delta = t;
            ev = Event::Enter;
            ev_j = static_cast<int>(j);
            ev_sign = -1.0;
          }
        }
      }
    }
    for (Eigen::Index i = 0; i < k; ++i) {
      const double bi = state.beta()(i);
      const double di = d(i);
      if (bi != 0.0 && di != 0.0 && bi * di < 0.0) {
        const double t = -bi / di;
        if (t > 1e-14 && t < delta * (1.0 - 1e-15)) {
          delta = t;
          ev = Event::Drop;
          ev_pos = i;
        }
      }
    }

    state.beta() += delta * d;
    lambda -= delta;
    r -= delta * u;
    c -= delta * a;
    if (delta < 1e-13 * lambda0) {
      if (++stalls > static_cast<std::size_t>(p)) {
        throw SolverError("basis_pursuit: stalled (degenerate ties)", lambda);
      }
    } else {
      stalls = 0;
    }
    if (steps % 50 == 0) {
      // bound incremental drift
      r = y;
      for (Eigen::Index i = 0; i < state.size(); ++i) {
        r -= state.beta()(i) * X.col(state.active()[static_cast<std::size_t>(i)]);
      }
      c = X.transpose() * r / static_cast<double>(n);
    }

    if (ev == Event::ReachZero) {
      lambda = 0.0;
      break;
    }
    if (ev == Event::Enter) {
      state.add(ev_j, ev_sign);
      in_active[static_cast<std::size_t>(ev_j)] = 1;
      last_dropped = -1;
    } else {
      const int j = state.active()[static_cast<std::size_t>(ev_pos)];
      state.drop(ev_pos);
      in_active[static_cast<std::size_t>(j)] = 0;
      last_dropped = j;
    }
    if (linf(r) <= feas) break;
    if (lambda <= 1e-15 * lambda0) break;
  }

  if (steps >= max_events) {
    std::ostringstream msg;
    msg << "basis_pursuit: event cap reached (lambda = " << lambda
        << ", residual_inf = " << linf(r) << ")";
    throw SolverError(msg.str(), linf(r));
  }

  // Polish: exact interpolation on the terminal support.
  const Eigen::Index k = state.size();
  Eigen::MatrixXd Xa(n, k);
  for (Eigen::Index i = 0; i < k; ++i) Xa.col(i) = X.col(state.active()[static_cast<std::size_t>(i)]);
  Eigen::VectorXd ba;
  if (k == n) {
    ba = Xa.partialPivLu().solve(y);
  } else {
    ba = Xa.colPivHouseholderQr().solve(y);
  }
  Eigen::VectorXd resid = y - Xa * ba;
  const double resid_inf = linf(resid);
  if (resid_inf > feas) {
    std::ostringstream msg;
    msg << "basis_pursuit: infeasible at termination (residual_inf = " << resid_inf
        << " > " << feas << ")";
    throw SolverError(msg.str(), resid_inf);
  }

  InterpolantSolution sol;
  sol.beta = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < k; ++i) sol.beta(state.active()[static_cast<std::size_t>(i)]) = ba(i);
  sol.objective = sol.beta.lpNorm<1>();
  sol.residual_inf = resid_inf;
  sol.active_set.assign(state.active().begin(), state.active().end());
  std::sort(sol.active_set.begin(), sol.active_set.end());
  sol.solver_steps = steps;

  // Dual certificate u = (1/n) Phi_A G_AA^{-1} z: exact sign vector on the
  // active set, sub-unit correlations elsewhere in general position.
  Eigen::VectorXd w = state.solve(state.signs());
  Eigen::VectorXd cert = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < k; ++i) {
    cert += w(i) * X.col(state.active()[static_cast<std::size_t>(i)]);
  }
  cert /= static_cast<double>(n);
  sol.dual_certificate = cert;
  return sol;
}

InterpolantSolution brute_force_bp_oracle(const Dataset& dataset) {
  const Eigen::Index n = dataset.n();
  const Eigen::Index p = dataset.p();
  if (p > 12 || n > 6) {
    throw std::invalid_argument("brute_force_bp_oracle: guarded to p <= 12, n <= 6");
  }
  const double y_inf = linf(dataset.y);
  if (y_inf == 0.0) return zero_solution(p);
  const double feas = 1e-9 * y_inf;

  double best_l1 = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_beta;
  std::vector<int> best_support;
  std::size_t tried = 0;

  const unsigned full = 1u << p;
  for (unsigned mask = 1; mask < full; ++mask) {
    const int size = __builtin_popcount(mask);
    if (size > n) continue;
    ++tried;
    std::vector<int> support;
    support.reserve(static_cast<std::size_t>(size));
    for (int j = 0; j < p; ++j) {
      if (mask & (1u << j)) support.push_back(j);
    }
    Eigen::MatrixXd Xs(n, size);
    for (int i = 0; i < size; ++i) Xs.col(i) = dataset.phi.col(support[static_cast<std::size_t>(i)]);
    Eigen::VectorXd bs = Xs.colPivHouseholderQr().solve(dataset.y);
    if (linf(dataset.y - Xs * bs) > feas) continue;  // infeasible support, skip

    const double l1 = bs.lpNorm<1>();
    bool better = l1 < best_l1 - 1e-12;
    if (!better && std::abs(l1 - best_l1) <= 1e-12) {
      better = std::lexicographical_compare(support.begin(), support.end(),
                                            best_support.begin(), best_support.end());
    }
    if (better) {
      best_l1 = l1;
      best_support = support;
      best_beta = Eigen::VectorXd::Zero(p);
      for (int i = 0; i < size; ++i) best_beta(support[static_cast<std::size_t>(i)]) = bs(i);
    }
  }
  if (!best_beta.size()) {
    throw SolverError("brute_force_bp_oracle: no feasible support found");
  }

  InterpolantSolution sol;
  sol.beta = best_beta;
  sol.objective = best_l1;
  sol.residual_inf = linf(dataset.y - dataset.phi * best_beta);
  sol.active_set = best_support;
  sol.solver_steps = tried;
  return sol;
}

LassoResult lasso_coordinate_descent(const Dataset& dataset, double lambda, double tol,
                                     std::size_t max_sweeps, const Eigen::VectorXd* warm_start) {
  if (!(lambda >= 0.0)) throw std::domain_error("lasso_coordinate_descent: lambda < 0");
  const auto& X = dataset.phi;
  const auto& y = dataset.y;
  const Eigen::Index n = dataset.n();
  const Eigen::Index p = dataset.p();
  const double dn = static_cast<double>(n);

  Eigen::VectorXd ghat(p);
  for (Eigen::Index j = 0; j < p; ++j) ghat(j) = X.col(j).squaredNorm() / dn;

  LassoResult res;
  res.beta = warm_start ? *warm_start : Eigen::VectorXd::Zero(p);
  Eigen::VectorXd r = y - X * res.beta;
  const double y_sq = y.squaredNorm();

  for (std::size_t sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Eigen::Index j = 0; j < p; ++j) {
      if (ghat(j) <= 0.0) continue;
      const double old = res.beta(j);
      const double rho = old + X.col(j).dot(r) / (dn * ghat(j));
      const double neu = soft_threshold(rho, lambda / ghat(j));
      if (neu != old) {
        r += (old - neu) * X.col(j);
        res.beta(j) = neu;
      }
    }
    res.sweeps = sweep;

    const Eigen::VectorXd corr = X.transpose() * r / dn;
    if (lambda == 0.0) {
      res.gap = linf(corr);
      if (res.gap <= tol) {
        res.converged = true;
        return res;
      }
      continue;
    }
    // Duality gap with the scaled-residual dual point u = s r,
    // s = min(1, lambda / ||corr||_inf).
    const double corr_inf = linf(corr);
    const double s = corr_inf > lambda ? lambda / corr_inf : 1.0;
    const double primal = 0.5 * r.squaredNorm() / dn + lambda * res.beta.lpNorm<1>();
    const double dual = 0.5 * (y_sq - (y - s * r).squaredNorm()) / dn;
    res.gap = primal - dual;
    if (res.gap <= tol) {
      res.converged = true;
      return res;
    }
  }
  return res;  // best iterate with its gap; caller decides whether to treat as error
}

LassoCvResult lasso_cv(const Dataset& dataset, std::size_t n_folds, std::size_t grid_size) {
  const Eigen::Index n = dataset.n();
  if (n_folds < 2 || static_cast<std::size_t>(n) < n_folds) {
    throw std::invalid_argument("lasso_cv: need n >= n_folds >= 2");
  }
  const double dn = static_cast<double>(n);
  const double lambda_max = linf(dataset.phi.transpose() * dataset.y / dn);
  if (lambda_max == 0.0) {
    LassoCvResult out;
    out.lambda_opt = 0.0;
    out.beta_opt = Eigen::VectorXd::Zero(dataset.p());
    return out;
  }

  LassoCvResult out;
  out.lambda_grid.resize(grid_size);
  const double lo = std::log(1e-3 * lambda_max);
  const double hi = std::log(lambda_max);
  for (std::size_t g = 0; g < grid_size; ++g) {
    // descending from lambda_max
    const double f = grid_size == 1 ? 0.0 : static_cast<double>(g) / static_cast<double>(grid_size - 1);
    out.lambda_grid[g] = std::exp(hi + f * (lo - hi));
  }
  out.cv_mse.assign(grid_size, 0.0);

  for (std::size_t f = 0; f < n_folds; ++f) {
    const Eigen::Index lo_row = static_cast<Eigen::Index>(f * static_cast<std::size_t>(n) / n_folds);
    const Eigen::Index hi_row =
        static_cast<Eigen::Index>((f + 1) * static_cast<std::size_t>(n) / n_folds);
    const Eigen::Index n_val = hi_row - lo_row;
    const Eigen::Index n_tr = n - n_val;

    Dataset train = dataset;
    train.phi.resize(n_tr, dataset.p());
    train.y.resize(n_tr);
    train.phi.topRows(lo_row) = dataset.phi.topRows(lo_row);
    train.y.head(lo_row) = dataset.y.head(lo_row);
    train.phi.bottomRows(n - hi_row) = dataset.phi.bottomRows(n - hi_row);
    train.y.tail(n - hi_row) = dataset.y.tail(n - hi_row);

    const auto val_phi = dataset.phi.middleRows(lo_row, n_val);
    const auto val_y = dataset.y.segment(lo_row, n_val);

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(dataset.p());
    for (std::size_t g = 0; g < grid_size; ++g) {
      auto fit = lasso_coordinate_descent(train, out.lambda_grid[g], 1e-7, 2000, &beta);
      beta = fit.beta;
      const double mse = (val_y - val_phi * beta).squaredNorm() / static_cast<double>(n_val);
      out.cv_mse[g] += mse / static_cast<double>(n_folds);
    }
  }

  std::size_t best = 0;
  for (std::size_t g = 1; g < grid_size; ++g) {
    if (out.cv_mse[g] < out.cv_mse[best]) best = g;  // ties keep the larger lambda
  }
  out.lambda_opt = out.lambda_grid[best];

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(dataset.p());
  for (std::size_t g = 0; g <= best; ++g) {
    auto fit = lasso_coordinate_descent(dataset, out.lambda_grid[g], 1e-8, 5000, &beta);
    beta = fit.beta;
  }
  out.beta_opt = beta;
  return out;
}

}  // namespace ilab
