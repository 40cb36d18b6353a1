#pragma once

#include <cstdint>
#include <random>

namespace gaterace {

/// Seeded random source with portable transforms.
///
/// The std engines are bit-exact by the standard but the std distributions
/// are not, so uniform and normal draws are derived here from raw engine
/// output. Identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Independent stream for a given (seed, stream id) pair.
  static Rng stream(std::uint64_t seed, std::uint64_t stream_id);

  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace gaterace
