#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace transit_robust {

// SplitMix64 finalizer.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives the seed of stream `index` from `master`. Streams are independent of
// the order in which they are requested, so parallel workers can derive their
// own seeds.
inline constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0xD1B54A32D192ED03ULL));
}

// Engine wrapper whose derived draws are identical on every standard library
// (std::uniform_*_distribution are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] (inclusive).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % span);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace transit_robust
