#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <utility>

namespace featline {

/// Counter-based SplitMix64 stream: the k-th output is a fixed mixing
/// function of (seed, k), so sequences are identical on every platform.
///
/// Bounded integers and normals are derived here rather than through
/// <random> distributions, whose outputs are implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : seed_(seed) {}

  /// Stream for (seed, substream), e.g. (experiment seed, run index).
  SplitMix64(std::uint64_t seed, std::uint64_t substream) noexcept
      : seed_(mix(seed ^ mix(substream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next() noexcept {
    return mix(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL);
  }

  /// Uniform integer in [0, bound), bound > 0. Rejection sampling keeps it
  /// exactly unbiased.
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1p-53;
  }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Standard normal via Box-Muller.
  double normal() noexcept {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace featline
