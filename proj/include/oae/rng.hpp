#pragma once

#include <cstdint>

namespace oae {

/// SplitMix64: 64-bit state, one multiply-xorshift finalizer per draw.
/// Chosen because every port of the simulator must reproduce traces
/// bit-for-bit from a seed; the algorithm is tiny and has published
/// reference outputs (see the vectors frozen in the test suite).
class SplitMix64 {
 public:
  constexpr explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform draw in [0, 1) with 53 bits of precision.
  constexpr double next_unit() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  /// Bernoulli draw. Always consumes exactly one output so that the
  /// stream stays aligned regardless of the probability value.
  constexpr bool chance(double p) { return next_unit() < p; }

  /// The finalizer alone, usable as a stateless 64-bit mixer.
  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Derives an independent child stream for a named channel. Streams for
  /// distinct channel ids never share state with the parent seed's stream.
  static constexpr SplitMix64 derive(std::uint64_t seed, std::uint64_t channel) {
    return SplitMix64(mix(seed + 0x9E3779B97F4A7C15ull) ^ mix(channel + 1));
  }

 private:
  std::uint64_t state_;
};

}  // namespace oae
