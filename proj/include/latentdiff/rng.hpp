#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "latentdiff/tensor.hpp"

namespace latentdiff {

/// Seeded random source. Identical (seed, stream) pairs produce identical
/// draw sequences; distinct streams are decorrelated through splitmix64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Named substream of a master seed, e.g. ("generate", bin id).
  static Rng substream(std::uint64_t master_seed, std::string_view name,
                       std::uint64_t index = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);   // [lo, hi)
  double normal();                        // N(0, 1)
  std::size_t index(std::size_t n);       // uniform in [0, n)

  Matrix normal_matrix(Index rows, Index cols);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);
/// Seed for a named stage: splitmix64(master ^ fnv1a64(name)).
std::uint64_t derive_seed(std::uint64_t master_seed, std::string_view name);

}  // namespace latentdiff
