#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>

namespace csanet {

// Derives the seed of a named substream: splitmix64(seed ^ fnv1a64(name)).
// Every consumer of randomness (init, dropout, augmentation, shuffle, ...)
// draws from its own stream so that toggling one component never shifts the
// draws seen by another.
std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);

// Seedable random stream. Built on std::mt19937_64 whose output sequence is
// fixed by the standard; the distributions below are implemented here rather
// than taken from <random> so results do not depend on the standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng derive(std::uint64_t seed, std::string_view stream) {
    return Rng(stream_seed(seed, stream));
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_normal_;
};

}  // namespace csanet
