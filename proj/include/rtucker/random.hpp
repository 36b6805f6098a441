#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace rtucker {

// Counter-based SplitMix64 generator.
//
// The n-th output of a stream with key k is mix64(k + (n+1) * gamma), so the
// whole state is the pair (key, counter). Independent sub-streams are derived
// with split(tag), which hashes the tag into a fresh key; two streams split
// from the same parent with different tags never share a key schedule.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  explicit CounterRng(std::uint64_t seed = 0) : key_(mix64(seed ^ 0x6a09e667f3bcc909ULL)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
  }

  CounterRng split(std::uint64_t tag) const {
    CounterRng child;
    child.key_ = mix64(key_ ^ mix64(tag + 0xbb67ae8584caa73bULL));
    return child;
  }

  CounterRng split(std::string_view tag) const {
    // FNV-1a, only used to turn readable tags into 64-bit stream ids.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return split(h);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

// Uniform double in [0, 1) built from the top 53 bits.
inline double uniform01(CounterRng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(CounterRng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

}  // namespace rtucker
