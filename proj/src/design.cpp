#include "ilab/design.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "ilab/errors.hpp"

namespace ilab {

CovarianceSpec build_covariance(CovKind kind, std::size_t p, std::size_t k_star,
                                double lambda_head, double lambda_tail) {
  std::vector<std::string> violations;
  if (p < 1) violations.push_back("p must be >= 1");
  if (!(lambda_tail > 0.0)) violations.push_back("lambda_tail must be > 0");
  if (kind == CovKind::Isotropic) {
    if (k_star != 0) violations.push_back("isotropic covariance requires k_star = 0");
  } else {
    if (k_star == 0) violations.push_back("spiked covariance requires k_star > 0");
    if (k_star >= p) violations.push_back("spiked covariance requires k_star < p");
    if (!(lambda_head >= lambda_tail)) violations.push_back("lambda_head must be >= lambda_tail");
  }
  if (!violations.empty()) {
    std::ostringstream msg;
    msg << "build_covariance:";
    for (const auto& v : violations) msg << " [" << v << "]";
    throw InvalidSpecError(msg.str());
  }

  CovarianceSpec spec;
  spec.kind = kind;
  spec.p = p;
  spec.k_star = (kind == CovKind::Isotropic) ? 0 : k_star;
  spec.lambda_head = (kind == CovKind::Isotropic) ? lambda_tail : lambda_head;
  spec.lambda_tail = lambda_tail;
  const double tail_dim = static_cast<double>(p - spec.k_star);
  spec.r1 = tail_dim;
  spec.r2 = tail_dim;
  spec.trace = static_cast<double>(spec.k_star) * spec.lambda_head + tail_dim * lambda_tail;
  return spec;
}

Dataset generate_dataset(const CovarianceSpec& cov, const SignalSpec& signal, std::size_t n,
                         double sigma2, Ensemble ensemble, const RngStream& stream) {
  if (n < 1) throw InvalidSpecError("generate_dataset: n must be >= 1");
  if (cov.p < 1) throw InvalidSpecError("generate_dataset: covariance has p = 0");
  if (!(sigma2 >= 0.0)) throw InvalidSpecError("generate_dataset: sigma2 must be >= 0");
  if (signal.support_size > cov.p) {
    throw InvalidSpecError("generate_dataset: signal support exceeds p");
  }
  if (cov.kind == CovKind::SpikedIsotropic && signal.support_size > cov.k_star) {
    throw InvalidSpecError("generate_dataset: spiked signal support must lie in the head");
  }

  Dataset ds;
  ds.cov = cov;
  ds.ensemble = ensemble;
  ds.sigma2 = sigma2;
  ds.base_seed = stream.base_seed;
  ds.stream_id = stream.stream_id;

  const auto p = static_cast<Eigen::Index>(cov.p);
  const auto rows = static_cast<Eigen::Index>(n);
  Rng rng(stream);

  ds.phi.resize(rows, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double scale = std::sqrt(cov.eigenvalue(static_cast<std::size_t>(j)));
    for (Eigen::Index i = 0; i < rows; ++i) {
      ds.phi(i, j) = scale * rng.draw(ensemble);
    }
  }

  ds.beta_star = Eigen::VectorXd::Zero(p);
  for (std::size_t j = 0; j < signal.support_size; ++j) {
    double v = signal.magnitude;
    if (signal.randomize_signs && (rng.next_u64() & 1ull)) v = -v;
    ds.beta_star(static_cast<Eigen::Index>(j)) = v;
  }

  const double noise_sd = std::sqrt(sigma2);
  Eigen::VectorXd eps(rows);
  for (Eigen::Index i = 0; i < rows; ++i) eps(i) = noise_sd * rng.normal();

  ds.y = ds.phi * ds.beta_star + eps;
  return ds;
}

double excess_risk(const Eigen::VectorXd& beta_hat, const Dataset& dataset) {
  if (beta_hat.size() != dataset.p()) {
    throw std::invalid_argument("excess_risk: dimension mismatch");
  }
  const bool scaled = dataset.normalized();
  double risk = 0.0;
  for (Eigen::Index j = 0; j < beta_hat.size(); ++j) {
    double d = beta_hat(j) - dataset.beta_star(j);
    if (scaled) d /= dataset.col_scales(j);  // back to original coordinates
    risk += dataset.cov.eigenvalue(static_cast<std::size_t>(j)) * d * d;
  }
  return risk;
}

Dataset column_normalize(const Dataset& dataset) {
  if (dataset.normalized()) {
    throw std::invalid_argument("column_normalize: dataset is already normalized");
  }
  const auto n = dataset.n();
  Dataset out = dataset;
  out.col_scales.resize(dataset.p());
  for (Eigen::Index j = 0; j < dataset.p(); ++j) {
    const double s = std::sqrt(dataset.phi.col(j).squaredNorm() / static_cast<double>(n));
    if (!(s > 0.0)) {
      std::ostringstream msg;
      msg << "column_normalize: column " << j << " is zero";
      throw std::invalid_argument(msg.str());
    }
    out.col_scales(j) = s;
    out.phi.col(j) /= s;
    out.beta_star(j) *= s;
  }
  return out;
}

Dataset denormalize(const Dataset& dataset) {
  if (!dataset.normalized()) {
    throw std::invalid_argument("denormalize: dataset is not normalized");
  }
  Dataset out = dataset;
  for (Eigen::Index j = 0; j < dataset.p(); ++j) {
    const double s = dataset.col_scales(j);
    out.phi.col(j) *= s;
    out.beta_star(j) /= s;
  }
  out.col_scales.resize(0);
  return out;
}

Eigen::VectorXd beta_to_original(const Dataset& normalized, const Eigen::VectorXd& beta) {
  if (!normalized.normalized()) {
    throw std::invalid_argument("beta_to_original: dataset is not normalized");
  }
  if (beta.size() != normalized.p()) {
    throw std::invalid_argument("beta_to_original: dimension mismatch");
  }
  return beta.cwiseQuotient(normalized.col_scales);
}

namespace {

constexpr char kMagic[8] = {'I', 'L', 'A', 'B', 'D', 'S', '1', '\n'};

void put_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void put_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void write_dataset(const Dataset& dataset, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("write_dataset: cannot open " + path);
  os.write(kMagic, sizeof(kMagic));
  put_u64(os, static_cast<std::uint64_t>(dataset.n()));
  put_u64(os, static_cast<std::uint64_t>(dataset.p()));
  put_u64(os, static_cast<std::uint64_t>(dataset.cov.kind));
  put_u64(os, dataset.cov.k_star);
  put_f64(os, dataset.cov.lambda_head);
  put_f64(os, dataset.cov.lambda_tail);
  put_f64(os, dataset.sigma2);
  put_u64(os, static_cast<std::uint64_t>(dataset.ensemble));
  put_u64(os, dataset.base_seed);
  put_u64(os, dataset.stream_id);
  put_u64(os, static_cast<std::uint64_t>(dataset.col_scales.size()));
  for (Eigen::Index j = 0; j < dataset.p(); ++j) {
    for (Eigen::Index i = 0; i < dataset.n(); ++i) put_f64(os, dataset.phi(i, j));
  }
  for (Eigen::Index i = 0; i < dataset.n(); ++i) put_f64(os, dataset.y(i));
  for (Eigen::Index j = 0; j < dataset.p(); ++j) put_f64(os, dataset.beta_star(j));
  for (Eigen::Index j = 0; j < dataset.col_scales.size(); ++j) put_f64(os, dataset.col_scales(j));
  if (!os) throw std::runtime_error("write_dataset: write failed for " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("read_dataset: cannot open " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_dataset: bad magic in " + path);
  }
  const auto n = static_cast<Eigen::Index>(get_u64(is));
  const auto p = static_cast<Eigen::Index>(get_u64(is));
  const auto kind = static_cast<CovKind>(get_u64(is));
  const std::size_t k_star = get_u64(is);
  const double lambda_head = get_f64(is);
  const double lambda_tail = get_f64(is);
  const double sigma2 = get_f64(is);
  const auto ensemble = static_cast<Ensemble>(get_u64(is));
  const std::uint64_t base_seed = get_u64(is);
  const std::uint64_t stream_id = get_u64(is);
  const auto n_scales = static_cast<Eigen::Index>(get_u64(is));

  Dataset ds;
  ds.cov = build_covariance(kind, static_cast<std::size_t>(p), k_star, lambda_head, lambda_tail);
  ds.sigma2 = sigma2;
  ds.ensemble = ensemble;
  ds.base_seed = base_seed;
  ds.stream_id = stream_id;
  ds.phi.resize(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) ds.phi(i, j) = get_f64(is);
  }
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) ds.y(i) = get_f64(is);
  ds.beta_star.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) ds.beta_star(j) = get_f64(is);
  ds.col_scales.resize(n_scales);
  for (Eigen::Index j = 0; j < n_scales; ++j) ds.col_scales(j) = get_f64(is);
  if (!is) throw std::runtime_error("read_dataset: truncated file " + path);
  return ds;
}

}  // namespace ilab
