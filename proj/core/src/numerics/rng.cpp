#include "lhts/numerics/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lhts::numerics {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream, std::uint64_t counter) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stream) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(seed ^ h) ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
}

double Rng::uniform() {
  // 53 random mantissa bits; identical on every platform.
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  // Box-Muller on our own uniforms so streams do not depend on the standard
  // library's distribution implementation.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::size_t Rng::index(std::size_t n) {
  if (n == 0) throw std::invalid_argument("Rng::index: empty range");
  return static_cast<std::size_t>(uniform() * static_cast<double>(n)) % n;
}

std::size_t Rng::categorical_log(std::span<const double> log_probs) {
  if (log_probs.empty()) throw std::invalid_argument("Rng::categorical_log: empty distribution");
  const double u = uniform();
  double cdf = 0.0;
  std::size_t last_supported = 0;
  for (std::size_t k = 0; k < log_probs.size(); ++k) {
    const double p = std::exp(log_probs[k]);
    if (p > 0.0) last_supported = k;
    cdf += p;
    if (u < cdf) return k;
  }
  return last_supported;
}

}  // namespace lhts::numerics
