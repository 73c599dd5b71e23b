#pragma once

#include <cstdint>
#include <random>

namespace sprl {

// All randomness in the project flows through explicitly passed Rng instances;
// there is no hidden global generator.
using Rng = std::mt19937_64;

inline Rng make_rng(uint64_t seed) { return Rng(seed); }

// Derive an independent stream from a base seed and a stream index.
inline Rng make_rng(uint64_t seed, uint64_t stream) {
  std::seed_seq seq{seed, uint64_t(stream ^ 0x9e3779b97f4a7c15ULL)};
  return Rng(seq);
}

// Derive an independent stream from a base seed, a stream index, and a
// substream (e.g. a step number), so a consumer can reconstruct any step's
// randomness without replaying the steps before it.
inline Rng make_rng(uint64_t seed, uint64_t stream, uint64_t substream) {
  std::seed_seq seq{seed, uint64_t(stream ^ 0x9e3779b97f4a7c15ULL),
                    uint64_t(substream ^ 0xbf58476d1ce4e5b9ULL)};
  return Rng(seq);
}

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  return std::uniform_int_distribution<int>(lo, hi_inclusive)(rng);
}

}  // namespace sprl
