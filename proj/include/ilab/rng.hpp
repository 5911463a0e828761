#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ilab {

enum class Ensemble { Gaussian, Rademacher, StudentT4 };

const char* to_string(Ensemble e);
Ensemble ensemble_from_string(std::string_view name);

/// 64-bit mixing (splitmix64 finalizer). Used to derive independent stream seeds
/// from (base_seed, stream_id) pairs.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

/// Immutable descriptor of a random stream. Identical (base_seed, stream_id)
/// reproduce identical sample sequences; distinct stream_ids give streams that
/// are independent for simulation purposes.
struct RngStream {
  std::uint64_t base_seed = 0;
  std::uint64_t stream_id = 0;

  /// Child stream keyed off this one (for per-trial / per-phase substreams).
  RngStream derive(std::uint64_t key) const { return {base_seed, mix_seed(stream_id, key)}; }
};

/// Deterministic generator. Distributions are implemented here rather than with
/// std:: distribution objects, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(const RngStream& s) : gen_(mix_seed(s.base_seed, s.stream_id)) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  /// Standard normal via the Marsaglia polar method.
  double normal();

  /// One draw from a unit-variance ensemble. Student-t4 is divided by sqrt(2)
  /// since Var(t_4) = 2.
  double draw(Ensemble e);

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// i.i.d. unit-variance draws; bit-deterministic in (stream, dist, count).
std::vector<double> sample(const RngStream& stream, Ensemble dist, std::size_t count);

}  // namespace ilab
