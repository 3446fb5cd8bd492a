#pragma once

#include <cstdint>

namespace kibam {

/// Counter-based SplitMix64 stream.
///
/// The n-th draw is mix64(seed + (n + 1) * 0x9E3779B97F4A7C15), where mix64
/// is the SplitMix64 finaliser (Steele, Lea & Flood 2014). Output depends only
/// on (seed, n), so golden files stay stable across platforms and standard
/// library versions. split(id) derives an independent child seed for parallel
/// consumers.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : seed_(seed) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1]; safe as a log() argument.
  double next_unit_open() { return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53; }

  double next_normal();

  SplitMix64 split(std::uint64_t stream_id) const {
    return SplitMix64(mix64(seed_ ^ mix64(stream_id + kGamma)));
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t draws() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace kibam
