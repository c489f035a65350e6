// Deterministic random number generation with named seed streams.
// All stochastic draws in the simulator go through Rng so that runs are
// reproducible bit-for-bit from a seed bundle, independent of the standard
// library's distribution implementations.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace aero {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1).
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    if (hi <= lo) return lo;
    const std::uint64_t span = std::uint64_t(hi - lo) + 1;
    // Rejection-free modulo bias is negligible for span << 2^64; use
    // multiply-shift for an unbiased-enough deterministic mapping.
    return lo + int((static_cast<unsigned __int128>(next_u64()) * span) >> 64);
  }

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal via Box-Muller (no cached spare: state stays minimal).
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double rayleigh(double sigma) {
    double u = uniform01();
    while (u >= 1.0) u = uniform01();
    return sigma * std::sqrt(-2.0 * std::log(1.0 - u));
  }

  // Knuth's method; fine for the small per-frame arrival means used here.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uniform01();
    while (prod > limit) {
      ++k;
      prod *= uniform01();
    }
    return k;
  }

  std::vector<std::uint64_t> state() const { return {s_[0], s_[1], s_[2], s_[3]}; }
  void restore(const std::vector<std::uint64_t>& words) {
    for (int i = 0; i < 4; ++i) s_[i] = words[std::size_t(i)];
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Derives independent named child streams from one master seed. The same
// (master, name) pair always yields the same stream.
class SeedStreams {
 public:
  SeedStreams() : master_(0) {}
  explicit SeedStreams(std::uint64_t master) : master_(master) {}

  std::uint64_t master() const { return master_; }

  std::uint64_t stream_seed(std::string_view name) const {
    std::uint64_t mix = master_ ^ fnv1a64(name);
    return splitmix64(mix);
  }

  Rng stream(std::string_view name) const { return Rng(stream_seed(name)); }

  // Child bundle for per-entity or per-episode sub-streams.
  SeedStreams fork(std::string_view name, std::uint64_t index = 0) const {
    std::uint64_t mix = stream_seed(name) ^ (0x9e3779b97f4a7c15ULL * (index + 1));
    return SeedStreams(splitmix64(mix));
  }

 private:
  std::uint64_t master_;
};

}  // namespace aero
