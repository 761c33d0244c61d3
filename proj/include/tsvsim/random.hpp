#pragma once

// Counter-based random streams.
//
// A stream is identified by (seed, name, index). Its key is a SplitMix64 hash
// of the three, and the n-th draw is SplitMix64(key + n * golden). Any
// consumer can therefore open its own stream without touching the others, and
// a Monte Carlo loop that opens one stream per trial (or per fixed chunk) is
// reproducible regardless of how the trials are scheduled on workers.
//
// Distributions are implemented here rather than taken from <random> so that
// results are bit-identical across standard library implementations.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace tsvsim {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_name(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0)
      : key_(splitmix64(splitmix64(seed ^ hash_name(name)) + index)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform on (0, 1]; safe as a log argument.
  double uniform_open() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

  bool coin() { return ((*this)() >> 63) != 0; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_open()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Circularly symmetric complex Gaussian with E|z|^2 = 1.
  std::complex<double> complex_normal() {
    const double re = normal();
    const double im = normal();
    return {re * std::numbers::sqrt2 / 2.0, im * std::numbers::sqrt2 / 2.0};
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tsvsim
