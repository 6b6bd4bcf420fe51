#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drg {

/// Portable seeded generator.
///
/// The engine is std::mt19937_64, whose raw output sequence is fixed by the
/// standard. The std distributions are not, so uniform and normal variates
/// are derived here from raw 64-bit draws. Every stochastic operation takes
/// its own stream: `Rng(seed, "fps")` and `Rng(seed, "object_pool")` never
/// share state even with equal seeds.
class Rng {
public:
  explicit Rng(std::uint64_t seed);
  Rng(std::uint64_t seed, std::string_view stream);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();

private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// splitmix64 finalizer, used to derive stream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed for a named sub-stream of `seed`.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);

}  // namespace drg
