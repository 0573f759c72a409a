#pragma once

#include <cstdint>
#include <random>

namespace scdonor {

using Rng = std::mt19937_64;

// splitmix64 finalizer; decorrelates structured seed inputs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Deterministic per-task seeds from a master seed and a stream index.
// Used for replicate-level parallelism: results do not depend on which
// worker runs which replicate.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ mix64(stream));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a,
                                 std::uint64_t b) {
  return mix64(derive_seed(master, a) ^ mix64(b + 0x632be59bd9b4e019ULL));
}

}  // namespace scdonor
