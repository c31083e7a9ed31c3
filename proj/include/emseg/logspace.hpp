#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>

namespace emseg {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shifted exponentials below this threshold cannot move a double-precision
// sum; skipping them also avoids subnormal slow paths.
inline constexpr double kExpNegligible = -40.0;

// exp(v) for v <= 0, treating negligibly small results as zero.
inline double exp_or_zero(double v) { return v > kExpNegligible ? std::exp(v) : 0.0; }

// Stable log(sum(exp(values))) with max shift. Exact for a singleton.
inline double log_sum_exp(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("log_sum_exp: empty input");
  if (values.size() == 1) return values[0];
  const double m = *std::max_element(values.begin(), values.end());
  if (m == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : values) sum += exp_or_zero(v - m);
  return m + std::log(sum);
}

inline double log_sum_exp(std::initializer_list<double> values) {
  return log_sum_exp(std::span<const double>(values.begin(), values.size()));
}

}  // namespace emseg
