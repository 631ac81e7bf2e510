#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace coopnet {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits, so a draw never
// reaches 1.0 and the mapping does not depend on the standard library.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Mixes a base seed with a stream tag (splitmix64 finalizer). Used to give
// auxiliary streams (mediator assignment, parameter init) their own
// sequence without touching the dynamics stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace coopnet
