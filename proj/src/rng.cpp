#include "ilab/rng.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ilab {

const char* to_string(Ensemble e) {
  switch (e) {
    case Ensemble::Gaussian:
      return "gaussian";
    case Ensemble::Rademacher:
      return "rademacher";
    case Ensemble::StudentT4:
      return "student_t4";
  }
  return "unknown";
}

Ensemble ensemble_from_string(std::string_view name) {
  if (name == "gaussian") return Ensemble::Gaussian;
  if (name == "rademacher") return Ensemble::Rademacher;
  if (name == "student_t4") return Ensemble::StudentT4;
  throw std::invalid_argument("unknown ensemble: " + std::string(name));
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(a) ^ (0x9E3779B97F4A7C15ull + mix64(b)));
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  have_spare_ = true;
  return u * f;
}

double Rng::draw(Ensemble e) {
  switch (e) {
    case Ensemble::Gaussian:
      return normal();
    case Ensemble::Rademacher:
      return (next_u64() & 1ull) ? 1.0 : -1.0;
    case Ensemble::StudentT4: {
      // t_4 = 2 Z / sqrt(chi2_4) with chi2_4 = -2 log(U1 U2); rescaled to unit variance.
      const double z = normal();
      const double u1 = 1.0 - uniform();
      const double u2 = 1.0 - uniform();
      const double chi2 = -2.0 * std::log(u1 * u2);
      const double t = 2.0 * z / std::sqrt(chi2);
      return t * 0.7071067811865475244;  // 1/sqrt(2), Var(t_4) = 2
    }
  }
  throw std::invalid_argument("Rng::draw: bad ensemble tag");
}

std::vector<double> sample(const RngStream& stream, Ensemble dist, std::size_t count) {
  Rng rng(stream);
  std::vector<double> out(count);
  for (auto& x : out) x = rng.draw(dist);
  return out;
}

}  // namespace ilab
