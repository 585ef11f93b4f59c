#pragma once

#include <cstdint>

namespace assign {

// Counter-based randomness: every draw is a pure function of
// (seed, stream, counter), so values are independent of evaluation order,
// partitioning, and platform. The generator chains the SplitMix64 finalizer
// (Steele, Lea & Flood 2014), which passes BigCrush as a mixing function.
//
// Streams keep independent uses of the same seed from colliding.
enum class RngStream : std::uint64_t {
  omega = 1,       // objective coefficient rows
  ineq_feature = 2,  // u rows
  eq_feature = 3,    // v rows
  rounding = 4,
  failure_injection = 5,
  test = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rng_word(std::uint64_t seed, std::uint64_t stream,
                                 std::uint64_t counter) {
  return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ counter);
}

constexpr std::uint64_t rng_word(std::uint64_t seed, RngStream stream,
                                 std::uint64_t counter) {
  return rng_word(seed, static_cast<std::uint64_t>(stream), counter);
}

// Uniform on [0,1) with 53 random mantissa bits.
inline double rng_uniform01(std::uint64_t seed, RngStream stream,
                            std::uint64_t counter) {
  return static_cast<double>(rng_word(seed, stream, counter) >> 11) *
         0x1.0p-53;
}

inline double rng_uniform(std::uint64_t seed, RngStream stream,
                          std::uint64_t counter, double lo, double hi) {
  return lo + (hi - lo) * rng_uniform01(seed, stream, counter);
}

}  // namespace assign
