#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace codelm {

// Deterministic random source. The engine is std::mt19937_64, whose raw
// output sequence is pinned by the C++ standard; every derived draw below is
// built directly from raw 64-bit outputs (no std::*_distribution, whose
// streams vary across standard libraries), so equal seeds give equal draw
// sequences on any conforming implementation.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : engine_(seed), seed_(seed) {}

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform index in [0, n); n must be positive.
  size_t next_index(size_t n) {
    size_t i = static_cast<size_t>(next_double() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

  bool next_bernoulli(double p) { return next_double() < p; }

 private:
  std::mt19937_64 engine_;
  uint64_t seed_;
};

// FNV-1a over arbitrary bytes; used for vocabulary hashes, manifest source
// hashes and parameter checksums.
inline uint64_t fnv1a64(const void* data, size_t size,
                        uint64_t state = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < size; ++i) {
    state ^= p[i];
    state *= 0x100000001b3ull;
  }
  return state;
}

}  // namespace codelm
