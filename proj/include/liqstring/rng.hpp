#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace liqstring {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Seed for a named pipeline stage.
inline constexpr std::uint64_t stage_seed(std::uint64_t seed, std::string_view stage) noexcept {
  return splitmix64(seed ^ fnv1a64(stage));
}

// Stateless hash of a 4-word counter.
inline constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                                            std::uint64_t c) noexcept {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ (b * 0xd6e8feb86659fd93ULL));
  h = splitmix64(h ^ (c * 0xa0761d6478bd642fULL));
  return h;
}

// Uniform in (0,1), never 0.
inline double to_unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Standard normal at counter (a,b,c): Box-Muller on two hashed uniforms.
inline double counter_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) noexcept {
  const std::uint64_t h1 = counter_hash(seed, a, b, c);
  const std::uint64_t h2 = splitmix64(h1 ^ 0x5851f42d4c957f2dULL);
  const double u1 = to_unit_open(h1);
  const double u2 = to_unit_open(h2);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Small sequential generator for the event synthesizer and samplers.
// Satisfies UniformRandomBitGenerator.
class splitmix_engine {
 public:
  using result_type = std::uint64_t;
  explicit splitmix_engine(std::uint64_t seed) noexcept : state_(seed) {}
  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }
  result_type operator()() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
  double uniform() noexcept { return to_unit_open((*this)()); }
  double normal() noexcept {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double exponential(double rate) noexcept { return -std::log(uniform()) / rate; }

 private:
  std::uint64_t state_;
};

}  // namespace liqstring
