#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "ilab/design.hpp"

namespace ilab {

struct InterpolantSolution {
  Eigen::VectorXd beta;
  double objective = 0.0;      // ||beta||_1 for l1 solvers, ||beta||_2 for min-l2
  double residual_inf = 0.0;   // max_i |Y - Phi beta|_i
  std::vector<int> active_set;
  std::optional<Eigen::VectorXd> dual_certificate;  // u with Phi^T u in d||.||_1
  std::size_t solver_steps = 0;
};

/// Least-l2-norm interpolant beta = Phi^T (Phi Phi^T)^{-1} Y (p >= n).
InterpolantSolution min_l2_interpolant(const Dataset& dataset);

/// Minimum-l1 interpolant via the lasso homotopy driven to the interpolation
/// limit. Returns a dual certificate u with (Phi^T u)_j = sign(beta_j) on the
/// active set and |(Phi^T u)_j| <= 1 + 1e-6 elsewhere.
InterpolantSolution basis_pursuit(const Dataset& dataset, double tol = 1e-8);

/// Exhaustive support enumeration for tiny instances (p <= 12, n <= 6); the BP
/// optimum lies on at most n coordinates, so searching all supports of size <= n
/// is exact. Test oracle only.
InterpolantSolution brute_force_bp_oracle(const Dataset& dataset);

/// Plain least squares (used below the interpolation threshold p <= n).
Eigen::VectorXd least_squares_fit(const Dataset& dataset);

struct LassoResult {
  Eigen::VectorXd beta;
  double gap = 0.0;        // duality gap at exit (gradient sup-norm when lambda = 0)
  std::size_t sweeps = 0;
  bool converged = false;
};

/// Cyclic coordinate descent for (1/2n)||Y - Phi b||^2 + lambda ||b||_1.
LassoResult lasso_coordinate_descent(const Dataset& dataset, double lambda, double tol = 1e-8,
                                     std::size_t max_sweeps = 100000,
                                     const Eigen::VectorXd* warm_start = nullptr);

struct LassoCvResult {
  double lambda_opt = 0.0;
  Eigen::VectorXd beta_opt;             // full-data refit at lambda_opt
  std::vector<double> lambda_grid;      // descending
  std::vector<double> cv_mse;           // mean validation MSE per lambda
};

/// 5-fold CV over a 50-point log grid on [1e-3 lambda_max, lambda_max]; folds are
/// contiguous row blocks (rows are already i.i.d.).
LassoCvResult lasso_cv(const Dataset& dataset, std::size_t n_folds = 5,
                       std::size_t grid_size = 50);

}  // namespace ilab
