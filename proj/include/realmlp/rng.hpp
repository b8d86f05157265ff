#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace realmlp {

// Seed mixing for independent, purpose-tagged random streams. Keeping one
// stream per (purpose, seed) pair means e.g. toggling dropout does not shift
// the draws used for weight initialization.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  return splitmix64(seed ^ fnv1a64(purpose));
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose,
                                 std::uint64_t index) {
  return splitmix64(derive_seed(seed, purpose) ^ splitmix64(index + 1));
}

// mt19937_64 engine with explicit transforms instead of std:: distributions,
// so the draw sequence is identical across standard library implementations.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}
  RngStream(std::uint64_t seed, std::string_view purpose)
      : eng_(derive_seed(seed, purpose)) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; consumes draws in pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Uniform integer in [lo, hi] (inclusive), rejection-sampled to be unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(eng_());  // full range
    const std::uint64_t limit = std::uint64_t(-1) - std::uint64_t(-1) % span;
    std::uint64_t v = 0;
    do {
      v = eng_();
    } while (v >= limit);
    return lo + static_cast<std::int64_t>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(
          uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Canonical purpose tags used across the library.
namespace rng_purpose {
inline constexpr std::string_view init = "init";
inline constexpr std::string_view dropout = "dropout";
inline constexpr std::string_view shuffle = "shuffle";
inline constexpr std::string_view split = "split";
inline constexpr std::string_view folds = "folds";
inline constexpr std::string_view hpo = "hpo";
inline constexpr std::string_view init_sample = "init_sample";
}  // namespace rng_purpose

}  // namespace realmlp
