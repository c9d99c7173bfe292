#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace multic {

/// Stream domains. Every random draw in the library comes from an Rng keyed
/// by (seed, domain, stream), so the draws of one cascade or one restart do
/// not depend on how many other streams exist or in which order they run.
enum class RngDomain : std::uint64_t {
  kNetwork = 1,   // stream = layer index (0 for the shared degree draws)
  kCascade = 2,   // stream = cascade index
  kRestart = 3,   // stream = restart seed
  kPhaseOne = 4,  // stream = 0
  kTest = 99,
};

/// Counter-based 64-bit generator: output n is splitmix64(key + n * golden).
/// Satisfies UniformRandomBitGenerator. Distribution helpers are implemented
/// here rather than through <random> distributions so that generated data is
/// bit-identical across standard library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, RngDomain domain, std::uint64_t stream)
      : key_(Mix(Mix(Mix(seed) ^ (static_cast<std::uint64_t>(domain) * kMulA)) ^
                 (stream * kMulB))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return Mix(key_ + (++counter_) * kGolden); }

  /// Uniform on [0, 1).
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1).
  double UniformOpen() {
    double u;
    do {
      u = Uniform();
    } while (u == 0.0);
    return u;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  /// Standard normal via Box-Muller (one value per call).
  double Normal() {
    const double u1 = UniformOpen();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double Exponential(double rate) { return -std::log(UniformOpen()) / rate; }

  bool Bernoulli(double p) { return Uniform() < p; }

  /// Unbiased integer on [0, n). n must be positive.
  std::uint64_t Below(std::uint64_t n) {
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      const std::uint64_t r = (*this)();
      if (r >= threshold) return r % n;
    }
  }

  template <typename T>
  void Shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[Below(i)]);
    }
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kMulA = 0xD1B54A32D192ED03ULL;
  static constexpr std::uint64_t kMulB = 0xABC98388FB8FAC03ULL;
  static constexpr double kPi = 3.14159265358979323846;

  static constexpr std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace multic
