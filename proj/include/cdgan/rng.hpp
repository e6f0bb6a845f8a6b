#pragma once

#include <cstdint>
#include <random>

namespace cdgan {

using Rng = std::mt19937_64;

// splitmix64, used to derive well-separated seeds from (seed, stream) pairs
// so that e.g. every epoch owns an independent reproducible stream.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

}  // namespace cdgan
