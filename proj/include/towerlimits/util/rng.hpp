#pragma once

#include <cstdint>
#include <random>

namespace towerlimits::util {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seed-splitting rule: replica i of root seed s draws its stream seed from
// splitmix64 started at s XOR (i+1)*golden.  Streams are order-independent,
// so merged replica results do not depend on scheduling.
inline std::uint64_t stream_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t state = root ^ (0x9e3779b97f4a7c15ULL * (index + 1));
  return splitmix64(state);
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  std::uint64_t state = seed;
  std::seed_seq seq{splitmix64(state), splitmix64(state), splitmix64(state), splitmix64(state)};
  return std::mt19937_64(seq);
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace towerlimits::util
