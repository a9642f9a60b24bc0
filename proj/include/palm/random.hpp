#pragma once

#include <cstdint>

namespace palm {

/// Independent child seed for stream `stream` of a parent seed (splitmix64
/// finalizer), so that sub-tasks never share a generator state.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

} // namespace palm
