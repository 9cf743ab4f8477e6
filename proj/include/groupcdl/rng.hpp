#pragma once

#include <cstdint>
#include <random>

namespace groupcdl {

/// Seeded random source with a portable output stream.
///
/// Uniforms come from the top 53 bits of std::mt19937_64, whose sequence is
/// fixed by the standard. Normals use the basic Box-Muller transform and
/// cache the second variate of each pair.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * n) % n; }

  double normal();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace groupcdl
