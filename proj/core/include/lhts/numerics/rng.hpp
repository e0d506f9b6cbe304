#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace lhts::numerics {

/// Mixes (seed, stream label, counter) into an engine seed. Stable across
/// platforms: FNV-1a over the label followed by splitmix64 finalization.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t counter);

/// Seeded generator with derivable independent substreams.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  /// Independent stream keyed by (seed, label, counter).
  static Rng derive(std::uint64_t seed, std::string_view stream, std::uint64_t counter = 0) {
    return Rng(derive_seed(seed, stream, counter));
  }
  Rng substream(std::string_view stream, std::uint64_t counter = 0) const {
    return derive(seed_, stream, counter);
  }

  std::uint64_t seed() const { return seed_; }

  /// Uniform in [0, 1).
  double uniform();
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Draws k with probability exp(log_probs[k]); inverse CDF in index order.
  std::size_t categorical_log(std::span<const double> log_probs);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace lhts::numerics
