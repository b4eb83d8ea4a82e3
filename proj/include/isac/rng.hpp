#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <random>

namespace isac {

// splitmix64 mixer, used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 1));
  std::uint64_t h = splitmix64(s);
  s = h ^ b;
  return splitmix64(s);
}

// Deterministic RNG: the mt19937_64 bit stream is fixed by the standard, and
// all distribution mappings below are written out explicitly so that a fixed
// seed gives bit-identical draws on any conforming implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed), seed_base_(seed) {}

  // Substream derived from this stream's seed and a tag; does not consume
  // state from the parent, so derivation order is irrelevant.
  Rng derive(std::uint64_t tag) const { return Rng(mix_seed(seed_base_, tag)); }
  Rng derive(std::uint64_t tag_a, std::uint64_t tag_b) const {
    return Rng(mix_seed(mix_seed(seed_base_, tag_a), tag_b));
  }

  std::uint64_t seed() const { return seed_base_; }

  std::uint64_t bits() { return engine_(); }

  // Uniform on [0,1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n) {
    // modulo bias is negligible for n << 2^64 and keeps the mapping portable
    return engine_() % n;
  }

  // Standard normal via Box-Muller; caches the second deviate.
  double gauss() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * 3.14159265358979323846 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  // Circularly-symmetric complex Gaussian with E|z|^2 = variance.
  std::complex<double> cgauss(double variance = 1.0) {
    const double s = std::sqrt(variance * 0.5);
    const double re = gauss();
    const double im = gauss();
    return {s * re, s * im};
  }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_base_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace isac
