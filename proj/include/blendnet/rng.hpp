#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "blendnet/common.hpp"

namespace blendnet {

// Deterministic RNG used everywhere seeded behaviour is promised. The standard
// library distributions are implementation-defined, so the uniform and normal
// transforms are written out here and never change.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    // splitmix64: tiny state, passes BigCrush, and trivially seedable.
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [lo, hi] inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    check(hi >= lo, "uniform_int: empty range [", lo, ",", hi, "]");
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int64_t>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Box-Muller; the spare value is cached so consecutive draws stay cheap.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

inline uint64_t fnv1a64(const void* data, size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

// Derives an independent stream seed from (seed, tag). Used so that e.g. the
// backbone and the blend modules draw from unrelated streams and adding one
// module never shifts another module's initialisation.
inline uint64_t derive_seed(uint64_t seed, const std::string& tag) {
  uint64_t h = fnv1a64(tag) ^ (seed * 0x9e3779b97f4a7c15ull + 0x632be59bd9b4e019ull);
  // One splitmix64 scramble so nearby seeds do not produce nearby streams.
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

inline uint64_t derive_seed(uint64_t seed, const std::string& tag, uint64_t a, uint64_t b = 0) {
  return derive_seed(seed ^ (a * 0xd6e8feb86659fd93ull) ^ (b * 0xa0761d6478bd642full), tag);
}

}  // namespace blendnet
