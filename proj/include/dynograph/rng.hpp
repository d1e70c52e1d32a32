#ifndef DYNOGRAPH_RNG_HPP
#define DYNOGRAPH_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace dynograph::rng {

// splitmix64 finalizer (Steele, Lea & Flood; Vigna's fixed-increment form).
inline std::uint64_t mix64(std::uint64_t z) {
  z += UINT64_C(0x9E3779B97F4A7C15);
  z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
  z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
  return z ^ (z >> 31);
}

// Counter-based stream: the draw for a given index tuple is a pure function
// of (seed, words...), so replicates and steps can be generated in any order
// or on any thread without changing values.
inline std::uint64_t key(std::uint64_t seed, std::initializer_list<std::uint64_t> words) {
  std::uint64_t h = mix64(seed);
  for (std::uint64_t w : words) h = mix64(h ^ w);
  return h;
}

inline double uniform01(std::uint64_t k) {
  // 53 mantissa bits, in [0, 1)
  return static_cast<double>(k >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller from two decorrelated keys.
inline double gauss(std::uint64_t k0, std::uint64_t k1) {
  const double u1 = 1.0 - uniform01(k0);  // (0, 1]
  const double u2 = uniform01(k1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace dynograph::rng

#endif  // DYNOGRAPH_RNG_HPP
