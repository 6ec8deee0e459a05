#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

// Seeding and sampling helpers. Everything downstream (init, shuffling,
// dropout, data generation, expressibility pairs) draws through these so that
// results do not depend on the standard library's distribution internals and
// are reproducible for a fixed seed regardless of thread count.

namespace qrnn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive combine for deriving substream seeds, e.g.
// mix_seed(master, epoch, sample_index).
inline std::uint64_t mix_seed(std::uint64_t a) { return splitmix64(a); }

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix_seed(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ULL + (splitmix64(a) << 6)), rest...);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

// Uniform in [0, 1) with 53 random bits.
inline double uniform_double(std::mt19937_64& rng) {
  return double(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_double(rng);
}

// Uniform integer in [0, n). Modulo bias is ~n/2^64, irrelevant at our sizes,
// but rejection keeps it exact.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Deterministic Fisher-Yates (std::shuffle leaves the draw sequence up to the
// library implementation).
template <typename T>
void shuffle_indices(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = std::size_t(uniform_index(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

// Box-Muller; used by the Haar-state oracle.
inline double normal_double(std::mt19937_64& rng) {
  double u1;
  do {
    u1 = uniform_double(rng);
  } while (u1 <= 0.0);
  double u2 = uniform_double(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
}

}  // namespace qrnn
