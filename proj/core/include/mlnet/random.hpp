#pragma once

#include <cstdint>
#include <random>

namespace mlnet {

using Rng = std::mt19937_64;

// splitmix64; used to derive independent per-component seeds from one
// master seed so that every stream in a run is a pure function of it.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + stream * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t master, std::uint64_t stream) {
  return Rng(split_seed(master, stream));
}

}  // namespace mlnet
