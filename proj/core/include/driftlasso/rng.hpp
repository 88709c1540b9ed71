#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace driftlasso {

// splitmix64 step; used only to derive seeds, never as the working generator.
inline std::uint64_t splitmix64_next(std::uint64_t& state) noexcept {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent seed for (seed, stream). Streams are decorrelated,
// so Monte Carlo trials keyed by index can run on any worker in any order
// and still reproduce bit-identically.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t s = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  const std::uint64_t a = splitmix64_next(s);
  const std::uint64_t b = splitmix64_next(s);
  return a ^ (b + (stream << 1 | 1));
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return std::mt19937_64(stream_seed(seed, stream));
}

// Standard normal sampler with an explicitly specified algorithm
// (Box-Muller over raw 53-bit uniforms). std::normal_distribution is
// implementation-defined, which would tie reproducibility to one toolchain.
class NormalSampler {
 public:
  explicit NormalSampler(std::mt19937_64 rng) : rng_(std::move(rng)) {}

  double operator()() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    // u1 in (0,1], u2 in [0,1)
    const double u1 = static_cast<double>((rng_() >> 11) + 1) * 0x1.0p-53;
    const double u2 = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64 rng_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Uniform double in [lo, hi) from raw 53-bit draws, same rationale as above.
inline double uniform_real(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

// Uniform integer in [0, n). Rejection-free modulo is fine here: n is always
// tiny relative to 2^64, so the bias is far below anything observable.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  return rng() % n;
}

}  // namespace driftlasso
