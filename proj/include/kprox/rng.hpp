#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>
#include <random>

namespace kprox {

// Derives a per-iteration stream seed from a base seed. splitmix64 finalizer;
// distinct k values give decorrelated streams for any base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (k + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic generator wrapper around std::mt19937_64.
//
// Distributions are hand-mapped from raw 64-bit draws so that the stream is
// identical across standard libraries:
//   uniform01: one raw draw, top 53 bits, value in [0, 1)
//   gaussian:  Box-Muller pair from two raw draws; the sine mate is cached
//              and returned by the next call, which consumes no raw draw
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // (0, 1] for the log draw so the radius stays finite
    const double u1 = static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Exact small-n binomial sampler: counts n uniform draws below prob.
  // Consumes exactly n raw draws.
  long long binomial(long long n, double prob) {
    long long hits = 0;
    for (long long i = 0; i < n; ++i)
      if (uniform01() < prob) ++hits;
    return hits;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kprox
