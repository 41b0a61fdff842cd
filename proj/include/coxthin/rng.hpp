#pragma once

#include <cstdint>
#include <random>

namespace coxthin {

// splitmix64 step; used to derive independent stream seeds from a root seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d4a2ca9f7d475bull;
  return z ^ (z >> 31);
}

// Deterministic sub-seed for stream `index` of a named purpose tag. Streams
// derived this way are insensitive to scheduling order, so replicate jobs and
// posterior draws can run on any number of workers.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t tag, std::uint64_t index = 0) {
  std::uint64_t s = root ^ (0x9e3779b97f4a7c15ull * (tag + 1));
  std::uint64_t a = splitmix64(s);
  s ^= index * 0xda942042e4dd58b5ull + 0x2545f4914f6cdd1dull;
  return a ^ splitmix64(s);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

// Seed stream tags; keep stable so identical configs reproduce bit-identical
// artifacts across runs and worker counts.
enum SeedTag : std::uint64_t {
  kSeedCovariate = 1,
  kSeedGpField = 2,
  kSeedMarkLayer = 3,
  kSeedPoisson = 4,
  kSeedThin = 5,
  kSeedPosterior = 6,
  kSeedGradcheck = 7,
  kSeedResidual = 8,
};

}  // namespace coxthin
