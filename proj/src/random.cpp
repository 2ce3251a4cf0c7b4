#include "zilm/random.hpp"

#include <cmath>

namespace zilm {

namespace {
constexpr std::uint64_t kMultiplier = 6364136223846793005ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomSource::RandomSource(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {
  // Standard pcg32 seeding sequence.
  inc_ = (mix64(stream) << 1u) | 1u;
  state_ = 0;
  next_u32();
  state_ += mix64(seed);
  next_u32();
}

RandomSource RandomSource::substream(std::uint64_t key) const {
  return RandomSource(seed_, mix64(stream_ ^ mix64(key + 1)));
}

std::uint32_t RandomSource::next_u32() {
  const std::uint64_t old = state_;
  state_ = old * kMultiplier + inc_;
  const auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
  const auto rot = static_cast<std::uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

std::uint64_t RandomSource::next_u64() {
  const std::uint64_t hi = next_u32();
  return (hi << 32u) | next_u32();
}

double RandomSource::uniform() {
  return static_cast<double>(next_u64() >> 11u) * 0x1.0p-53;
}

double RandomSource::uniform(double low, double high) {
  return low + (high - low) * uniform();
}

std::uint64_t RandomSource::index(std::uint64_t n) {
  if (n <= 1) return 0;
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r = next_u64();
  while (r >= limit) r = next_u64();
  return r % n;
}

double RandomSource::normal(double mean, double sd) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + sd * spare_;
  }
  double u = 0.0;
  double v = 0.0;
  double s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * factor;
  has_spare_ = true;
  return mean + sd * u * factor;
}

}  // namespace zilm
