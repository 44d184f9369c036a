#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace agos {

// splitmix64 finalizer; used to derive independent stream seeds from a base
// seed plus tags (epoch, batch index, ...) so resumable training can replay
// the exact random sequence without serializing generator state.
inline uint64_t mix_seed(uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t tag) { return mix_seed(seed ^ mix_seed(tag)); }

inline uint64_t mix_seed(uint64_t seed, uint64_t tag_a, uint64_t tag_b) {
  return mix_seed(mix_seed(seed, tag_a), tag_b);
}

// Deterministic random stream. mt19937_64 output is bit-exact across
// implementations; the derived draws below avoid std::*_distribution, whose
// algorithms are library-specific.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1).
  double uniform() { return (gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(gen_() % span);
  }

  // Standard normal via Box-Muller; one value per call, spare cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename Vec>
  void shuffle(Vec& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace agos
