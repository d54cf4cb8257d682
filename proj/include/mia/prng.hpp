#pragma once

#include <cstdint>

namespace mia {

// SplitMix64 (Steele, Lea, Vigna). 64-bit state, one multiply-xorshift
// chain per output. Every seeded decision in the toolkit (shuffles,
// synthetic corpora, fold assignment) goes through this generator so that
// results are identical across platforms and thread counts.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, bound). Modulo reduction: the bias is < bound / 2^64,
  // irrelevant at the bounds used here, and the result is the same on
  // every platform.
  uint64_t next_below(uint64_t bound) { return next() % bound; }

  // Uniform double in [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

 private:
  uint64_t state_;
};

// Stream derivation: mixes a label into a seed so independent substreams
// (per document, per fold, ...) never share state.
inline uint64_t mix_seed(uint64_t seed, uint64_t label) {
  SplitMix64 g(seed ^ (0x9e3779b97f4a7c15ULL * (label + 1)));
  return g.next();
}

}  // namespace mia
