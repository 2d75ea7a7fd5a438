#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace whittaker::logquad {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(e^a + e^b) without overflow; handles -inf operands.
inline double logaddexp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

// Running trapezoid of exp(log_f) on a uniform grid, returned in log space:
// out[i] = log(int_{t_0}^{t_i} e^{log_f}), out[0] = -inf.
inline std::vector<double> cumulative_trapezoid(std::span<const double> log_f, double dt) {
  std::vector<double> out(log_f.size(), kNegInf);
  const double log_half_dt = std::log(0.5 * dt);
  for (std::size_t i = 1; i < log_f.size(); ++i)
    out[i] = logaddexp(out[i - 1], log_half_dt + logaddexp(log_f[i - 1], log_f[i]));
  return out;
}

// (1/gamma) log(1 + gamma * I) given log I.
inline double scaled_log1p(double log_integral, double gamma) {
  return logaddexp(0.0, std::log(gamma) + log_integral) / gamma;
}

}  // namespace whittaker::logquad
