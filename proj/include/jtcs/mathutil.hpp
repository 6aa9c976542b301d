#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace jtcs {

// C(n, k) in 64-bit, saturating at uint64 max instead of overflowing.
inline std::uint64_t binomial_count(int n, int k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  std::uint64_t result = 1;
  for (int i = 1; i <= k; ++i) {
    const std::uint64_t num = static_cast<std::uint64_t>(n - k + i);
    if (result > kMax / num) return kMax;  // saturate
    result = result * num / static_cast<std::uint64_t>(i);
  }
  return result;
}

// ln C(n, k) via lgamma, exact enough for bound evaluation at any size.
inline double log_choose(int n, int k) {
  if (k < 0 || n < 0 || k > n) return -std::numeric_limits<double>::infinity();
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

inline double relative_error(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale == 0.0) return 0.0;
  return std::abs(a - b) / scale;
}

}  // namespace jtcs
