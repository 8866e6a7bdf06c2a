#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace marlab {

/// Deterministic random stream used everywhere in the library.
///
/// Wraps std::mt19937_64, whose raw 64-bit output is fully specified by the
/// C++ standard and therefore bit-identical across platforms. The standard
/// distribution adaptors are implementation-defined, so doubles and bounded
/// integers are derived from the raw stream by hand.
class Rng {
 public:
  static constexpr std::string_view kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform on (0, 1]; never returns zero.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Unbiased uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Decorrelated child seed for (seed, tag); splitmix64-based.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

 private:
  std::mt19937_64 engine_;
};

/// Draws an index from a probability vector. The row may undershoot 1 by
/// floating-point slack; the residual mass goes to the last positive entry.
int sample_categorical(std::span<const double> probs, Rng& rng);

}  // namespace marlab
