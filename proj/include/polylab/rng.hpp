#pragma once

#include <cmath>
#include <cstdint>

namespace polylab {

// SplitMix64. Small state, full 64-bit period, passes BigCrush when used as a
// stream; good enough for every Monte Carlo estimate in this project and,
// unlike <random> engines + distributions, bit-reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform on [0,1), 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0,1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection keeps it exactly unbiased.
  std::uint64_t below(std::uint64_t n) {
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller (we do not use std::normal_distribution:
  // its output is implementation-defined and would unpin frozen MC values).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Derive an independent stream. Streams for (seed, k) and (seed, k') are
  // decorrelated by the double SplitMix64 mix; used to shard MC work while
  // keeping results independent of shard order.
  Rng split(std::uint64_t stream) const {
    Rng mixer(state_ ^ (0x632be59bd9b4e019ULL * (stream + 1)));
    std::uint64_t s = mixer.next_u64();
    mixer.next_u64();
    return Rng(s ^ mixer.next_u64());
  }

 private:
  std::uint64_t state_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace polylab
