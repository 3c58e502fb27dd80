#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <string_view>

namespace riskfleet {

// Deterministic splitmix64 generator. The standard <random> distributions are
// implementation-defined, so all draws are derived from raw 64-bit output to
// keep traces bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Exponential with the given mean (inverse CDF).
  double exponential(double mean) { return -mean * std::log1p(-uniform01()); }

  // Uniform in [0, n). Modulo bias is ~n/2^64, irrelevant at simulation scale.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  // Stream splitting: fold tags into a seed so that per-(policy, seed, episode)
  // streams never overlap and adding a consumer never perturbs another stream.
  static std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    std::uint64_t z = h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t tag(std::string_view name) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = mix(0x8000000080000001ULL, seed);
    for (std::uint64_t t : tags) h = mix(h, t);
    return h;
  }

 private:
  std::uint64_t state_;
};

}  // namespace riskfleet
