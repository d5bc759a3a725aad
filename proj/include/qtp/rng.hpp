#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qtp {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Labelled pseudorandom stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The stream seed is splitmix64(root ^ fnv1a64(label)), so every
/// label ("topology", "sessions", "channel", ...) gets an independent stream
/// derived from one root seed. Conversions to doubles and bounded integers
/// are done here rather than through <random> distributions, whose output is
/// implementation-defined.
class RandomStream {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64+splitmix64-label/v1";

  RandomStream(std::uint64_t root_seed, std::string_view label)
      : engine_(detail::splitmix64(root_seed ^ detail::fnv1a64(label))) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Always consumes exactly one draw, so p=0 and p=1 keep the stream aligned
  /// with runs at other probabilities.
  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

inline RandomStream seeded_rng(std::uint64_t seed, std::string_view label = "root") {
  return RandomStream(seed, label);
}

}  // namespace qtp
