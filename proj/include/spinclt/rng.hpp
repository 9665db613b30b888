#pragma once

// Deterministic random number generation.
//
// Every stochastic routine in the library draws from a RandomStream that is
// derived from a single master seed plus a handful of integer labels
// (purpose tag, window size, replicate index, ...).  Derivation is
// counter-based: the same labels always yield the same stream, regardless of
// how many threads are running or in which order replicates are produced.

#include <cmath>
#include <cstdint>

namespace spinclt {

// SplitMix64 step; used both as a seed mixer and to bootstrap xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// xoshiro256++ (public-domain reference algorithm by Blackman/Vigna).
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : s_) word = splitmix64(sm);
    has_spare_normal_ = false;
    spare_normal_ = 0.0;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

  // Uniform integer in [0, n) via 128-bit multiply (no modulo bias worth
  // caring about at the 2^-64 level; bounded and branch-free).
  std::uint64_t uniform_below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller; pairs are cached so consumption is
  // deterministic (exactly one or zero u64 pairs per call).
  double normal() {
    if (has_spare_normal_) {
      has_spare_normal_ = false;
      return spare_normal_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_normal_ = true;
    return r * std::cos(theta);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t s_[4];
  bool has_spare_normal_;
  double spare_normal_;
};

// Counter-based derivation of independent streams from one master seed.
struct SeedPolicy {
  std::uint64_t master;

  // Derive a child seed from up to three integer labels.  Each label is
  // absorbed through a SplitMix64 round, so (a,b,c) != (a',b',c') yields
  // unrelated streams with overwhelming probability.
  std::uint64_t derive(std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) const {
    std::uint64_t h = master;
    h = absorb(h, a);
    h = absorb(h, b);
    h = absorb(h, c);
    return h;
  }

  RandomStream stream(std::uint64_t a, std::uint64_t b = 0,
                      std::uint64_t c = 0) const {
    return RandomStream(derive(a, b, c));
  }

 private:
  static std::uint64_t absorb(std::uint64_t h, std::uint64_t x) {
    std::uint64_t s = h ^ (x + 0x9E3779B97F4A7C15ULL);
    return splitmix64(s);
  }
};

// Stable label values for the major stream purposes (documented so output
// reproducibility does not depend on call order).
namespace stream_tag {
inline constexpr std::uint64_t kSample = 1;      // model replicate sampling
inline constexpr std::uint64_t kBootstrap = 2;   // bootstrap resampling
inline constexpr std::uint64_t kNullTable = 3;   // KS null calibration
inline constexpr std::uint64_t kSiteSample = 4;  // random site subsets
}  // namespace stream_tag

}  // namespace spinclt
