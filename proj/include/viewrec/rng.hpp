#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace viewrec {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Deterministic random stream with stable named substream derivation.
// Substreams depend only on the parent's seed, never on how many values
// the parent has already drawn, so derivation order is audit-friendly.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed)
      : seed_(seed), engine_(detail::splitmix64(seed)) {}

  RandomStream derive(std::string_view label) const {
    return RandomStream(detail::splitmix64(seed_ ^ detail::fnv1a(label)));
  }
  RandomStream derive(std::uint64_t index) const {
    return RandomStream(
        detail::splitmix64(seed_ ^ detail::splitmix64(index + 0x51ed270b7a64ULL)));
  }

  std::uint64_t seed() const { return seed_; }

  // uniform in [0,1)
  double uniform() {
    ++draws_;
    return (engine_() >> 11) * 0x1.0p-53;
  }

  std::uint64_t uniform_index(std::uint64_t bound) {
    ++draws_;
    return engine_() % bound;
  }

  // stateless Box-Muller; one value per pair of uniforms
  double gaussian() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  std::uint64_t draw_count() const { return draws_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::uint64_t draws_ = 0;
};

}  // namespace viewrec
