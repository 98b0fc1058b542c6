#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace ge2ae {

// Counter-based deterministic generator (splitmix64 core). Every consumer of
// randomness derives its own stream from (seed, purpose, counters), so the
// draw sequence of one consumer never shifts another's. This is what makes
// seeded runs bitwise reproducible regardless of worker-thread count.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Resamples until |z| <= cut, then scales by sigma.
  double truncated_normal(double sigma, double cut = 2.0) {
    double z = normal();
    while (std::fabs(z) > cut) z = normal();
    return sigma * z;
  }

  // Fisher-Yates.
  template <class T>
  void shuffle(T* first, std::size_t n) {
    for (std::size_t i = n; i > 1; --i) {
      const std::size_t j = next_u64() % i;
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream purposes, in documented consumption order of a training run:
// parameter init, per-epoch batch shuffle, per-image mask draw, per-image
// augmentation draws. Analysis/probing and data synthesis get their own tags.
enum class Stream : std::uint64_t {
  kInit = 0x101,
  kShuffle = 0x202,
  kMask = 0x303,
  kAugment = 0x404,
  kProbe = 0x505,
  kData = 0x606,
};

inline std::uint64_t mix_u64(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng stream_rng(std::uint64_t seed, Stream purpose, std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t s = mix_u64(seed, static_cast<std::uint64_t>(purpose));
  s = mix_u64(s, a);
  s = mix_u64(s, b);
  return Rng(s);
}

}  // namespace ge2ae
