#pragma once

#include <cstdint>
#include <string_view>

namespace zilm {

/// Seeded random source built on PCG32 (XSH-RR output over a 64-bit LCG).
///
/// Every draw is computed with integer arithmetic plus IEEE-754 basic
/// operations, so a (seed, stream) pair yields the same sequence on every
/// platform. Normal deviates use the Marsaglia polar method and therefore also
/// depend on std::log being the same implementation.
class RandomSource {
 public:
  static constexpr std::string_view kAlgorithm = "pcg32-xsh-rr-64/32";

  explicit RandomSource(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent sub-stream keyed by (seed, key); used for per-student draws.
  [[nodiscard]] RandomSource substream(std::uint64_t key) const;

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double low, double high);
  /// Uniform integer on [0, n). Unbiased (rejection sampling).
  std::uint64_t index(std::uint64_t n);
  double normal(double mean = 0.0, double sd = 1.0);
  bool bernoulli(double p) { return uniform() < p; }

  [[nodiscard]] std::uint64_t seed() const { return seed_; }
  [[nodiscard]] std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t state_ = 0;
  std::uint64_t inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finaliser; mixes keys into well-spread stream identifiers.
std::uint64_t mix64(std::uint64_t x);

}  // namespace zilm
