#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "ilab/rng.hpp"

namespace ilab {

enum class CovKind { Isotropic, SpikedIsotropic };

/// Declarative description of a diagonal covariance: either flat (lambda_tail
/// everywhere) or spiked-isotropic with a uniform head of k_star eigenvalues.
struct CovarianceSpec {
  CovKind kind = CovKind::Isotropic;
  std::size_t p = 0;
  std::size_t k_star = 0;     // 0 for isotropic
  double lambda_head = 1.0;   // unused for isotropic
  double lambda_tail = 1.0;

  // Derived tail summaries: r1 = Tr(S_T)/||S_T||_op, r2 = Tr(S_T)^2/||S_T||_F^2.
  // Both equal the tail dimension for an isotropic tail.
  double r1 = 0.0;
  double r2 = 0.0;
  double trace = 0.0;

  double eigenvalue(std::size_t j) const {
    return j < k_star ? lambda_head : lambda_tail;
  }
};

/// Validates the fields and fills in the derived ranks. Throws InvalidSpecError
/// listing every violated constraint.
CovarianceSpec build_covariance(CovKind kind, std::size_t p, std::size_t k_star,
                                double lambda_head, double lambda_tail);

/// Sparse signal on the first `support_size` coordinates, all set to +magnitude.
/// support_size = 0 encodes the pure-noise model.
struct SignalSpec {
  std::size_t support_size = 0;
  double magnitude = 0.0;
  bool randomize_signs = false;  // off by default; kept behind a flag
};

struct Dataset {
  Eigen::MatrixXd phi;        // n x p design
  Eigen::VectorXd y;          // n responses
  Eigen::VectorXd beta_star;  // p ground truth (in the same coordinates as phi)
  double sigma2 = 0.0;
  CovarianceSpec cov;
  Ensemble ensemble = Ensemble::Gaussian;
  std::uint64_t base_seed = 0;
  std::uint64_t stream_id = 0;

  // Nonempty iff this dataset is column-normalized: phi_j was divided by
  // col_scales[j] (and beta_star multiplied by it), so estimates map back to the
  // original coordinates as beta_j / col_scales[j].
  Eigen::VectorXd col_scales;

  Eigen::Index n() const { return phi.rows(); }
  Eigen::Index p() const { return phi.cols(); }
  bool normalized() const { return col_scales.size() > 0; }
  Eigen::VectorXd noise() const { return y - phi * beta_star; }
};

/// Rows of phi get population covariance cov (unit-variance ensemble draws with
/// column j scaled by sqrt(lambda_j)); y = phi * beta_star + eps with Gaussian
/// noise. Bit-deterministic in all arguments.
Dataset generate_dataset(const CovarianceSpec& cov, const SignalSpec& signal, std::size_t n,
                         double sigma2, Ensemble ensemble, const RngStream& stream);

/// Exact excess risk (beta_hat - beta*)^T Sigma (beta_hat - beta*) from the
/// covariance spec; no test set is sampled. beta_hat is interpreted in the
/// dataset's own coordinates (normalized or not).
double excess_risk(const Eigen::VectorXd& beta_hat, const Dataset& dataset);

/// Rescales every column to (1/n)||phi_j||^2 = 1 exactly, recording the factors.
Dataset column_normalize(const Dataset& dataset);

/// Inverse of column_normalize.
Dataset denormalize(const Dataset& dataset);

/// Maps an estimate computed on a normalized dataset back to original coordinates.
Eigen::VectorXd beta_to_original(const Dataset& normalized, const Eigen::VectorXd& beta);

/// Self-describing binary container; round-trips bit-exactly.
void write_dataset(const Dataset& dataset, const std::string& path);
Dataset read_dataset(const std::string& path);

}  // namespace ilab
