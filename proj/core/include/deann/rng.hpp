#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace deann {

/// Seedable generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so bounded
/// integers (Lemire's multiply-shift rejection), uniform doubles (top 53 bits)
/// and normals (Box-Muller) are derived here to keep every randomized
/// operation bit-reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::size_t below(std::size_t bound);

  /// Uniform double in [0, 1).
  double uniform();

  /// Standard normal variate.
  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finalizer; a bijective 64-bit mixer.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Seed for stream `stream` of a run seeded with `seed`:
/// splitmix64(seed + 0x9E3779B97F4A7C15 * (stream + 1)).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

}  // namespace deann
