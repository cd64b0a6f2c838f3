#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>
#include <vector>

namespace apt {

// SplitMix64 (Steele/Lea/Flood; constants from the public-domain reference
// implementation). Every random draw in the project goes through this
// generator: no std:: distributions, so identical seeds give identical
// streams on every platform.
//
// Reference outputs for seed 0:
//   e220a8397b1dcdaf 6e789e6aa1b965f4 06c45d188009454f f88bb8a8724c81ec
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53-bit mantissa.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0,n) via 128-bit multiply. n must be > 0.
  uint64_t next_below(uint64_t n) {
    return uint64_t((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  // Standard normal via Box-Muller on two fresh uniforms. The first uniform
  // is taken in (0,1] so the log is always finite.
  double next_normal() {
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  // Child stream keyed by an integer tag. The parent state is not advanced:
  // the child seed is the SplitMix64 output at offset (tag+1) from the
  // current state, so distinct tags give distinct, reproducible streams.
  Rng fork(uint64_t tag) const {
    uint64_t z = state_ + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
  }

  Rng fork(std::string_view tag) const { return fork(fnv1a64(tag)); }

  // In-place Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // FNV-1a 64-bit, used for string-keyed forks and content hashes.
  static uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  uint64_t state_;
};

}  // namespace apt
