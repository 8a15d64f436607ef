#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace freehand {

/// Counter-based generator: SplitMix64 evaluated at an explicit counter.
///
/// A stream is identified by (seed, stream). Draw k of that stream is
///
///   key    = mix64(seed ^ mix64(stream))
///   u64_k  = mix64(key + (k + 1) * 0x9E3779B97F4A7C15)
///
/// where mix64 is the SplitMix64 finalizer. Uniform doubles take the top 53
/// bits; normals use Box-Muller on two consecutive uniforms. Nothing depends
/// on std:: distributions, so the sequence is identical across standard
/// libraries, and any draw can be recomputed without replaying the stream.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  static constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  explicit constexpr CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix64(seed ^ mix64(stream))) {}

  constexpr std::uint64_t at(std::uint64_t counter) const {
    return mix64(key_ + (counter + 1) * kGolden);
  }

  constexpr std::uint64_t next_u64() { return at(counter_++); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return mul_high(next_u64(), n);
  }

  /// High 64 bits of a 64x64 product.
  static std::uint64_t mul_high(std::uint64_t a, std::uint64_t b) {
    const std::uint64_t a_lo = a & 0xFFFFFFFFu, a_hi = a >> 32;
    const std::uint64_t b_lo = b & 0xFFFFFFFFu, b_hi = b >> 32;
    const std::uint64_t lo_lo = a_lo * b_lo;
    const std::uint64_t hi_lo = a_hi * b_lo;
    const std::uint64_t lo_hi = a_lo * b_hi;
    const std::uint64_t cross = (lo_lo >> 32) + (hi_lo & 0xFFFFFFFFu) + lo_hi;
    return a_hi * b_hi + (hi_lo >> 32) + (cross >> 32);
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] keeps the log finite.
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace freehand
