#pragma once

#include <cmath>
#include <cstdint>

namespace accjoint {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// xoshiro256** with our own scalar samplers on top. std::<distribution>s are
// implementation-defined, which would break the byte-identical chain contract,
// so every variate here is generated from an exactly specified recipe.
//
// Streams are derived, not split: derive(seed, k1, k2, ...) hashes the keys
// into an independent generator, so per-subject/per-sweep streams do not
// depend on thread scheduling.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64(sm);
  }

  static RngStream derive(std::uint64_t seed, std::uint64_t k1, std::uint64_t k2 = 0x5bd1e995u,
                          std::uint64_t k3 = 0xc2b2ae35u) {
    std::uint64_t h = seed;
    splitmix64(h);
    h ^= k1 + 0x9e3779b97f4a7c15ull;
    splitmix64(h);
    h ^= k2 + 0xbf58476d1ce4e5b9ull;
    splitmix64(h);
    h ^= k3 + 0x94d049bb133111ebull;
    return RngStream(splitmix64(h));
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform on the open interval (0,1); never exactly 0 or 1, so logs and
  // normal quantiles stay finite.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. No caching: each call consumes exactly
  // two uniforms, which keeps derived-stream replay simple to reason about.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  // Marsaglia-Tsang; shape boosting for shape < 1.
  double gamma(double shape, double scale) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  double chi_square(double df) { return gamma(0.5 * df, 2.0); }

  // Inverse gamma with *rate* beta: X = 1/Y, Y ~ Gamma(shape, rate=beta).
  double inverse_gamma(double shape, double rate) { return rate / gamma(shape, 1.0); }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t state_[4];
};

}  // namespace accjoint
