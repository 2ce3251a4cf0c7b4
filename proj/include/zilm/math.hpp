#pragma once

#include <cmath>

namespace zilm {

inline constexpr double kLogFloor = 1e-12;
/// Largest double below 1.
inline constexpr double kOneMinus = 1.0 - 0x1.0p-53;

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

inline double clamped_log(double x) { return std::log(x < kLogFloor ? kLogFloor : x); }

}  // namespace zilm
