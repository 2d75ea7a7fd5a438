#pragma once

#include <algorithm>
#include <vector>

#include "whittaker/logquad.hpp"
#include "whittaker/model.hpp"

// One-sided reflection maps with a moving barrier.
//
// reflect_above keeps the output on or above a barrier b:
//   c = start - psi(a)
//   out(t) = c + psi(t) + max_{s <= t} (b(s) - psi(s) - c)_+
// reflect_below is the mirror image for an upper barrier. Both are evaluated
// at grid points in one forward pass.
namespace whittaker::skorokhod {

struct ReflectionResult {
  SamplePath path;
  // Running maximum term; nonnegative and nondecreasing. Added for
  // reflect_above, subtracted for reflect_below.
  SamplePath push;
  // Grid points where the running maximum strictly increases.
  std::vector<bool> active;
  double offset = 0.0;  // c = start - psi(a)
};

inline ReflectionResult reflect_above(const SamplePath& driver, const SamplePath& barrier, double start) {
  require_same_grid(driver, barrier, "reflect_above");
  const std::size_t m = driver.size();
  ReflectionResult r{SamplePath(driver.grid()), SamplePath(driver.grid()), std::vector<bool>(m, false),
                     start - driver[0]};
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double excess = barrier[i] - driver[i] - r.offset;
    if (excess > running) {
      running = excess;
      r.active[i] = true;
    }
    r.push[i] = running;
    r.path[i] = r.offset + driver[i] + running;
  }
  r.path[0] = start + r.push[0];
  return r;
}

inline ReflectionResult reflect_below(const SamplePath& driver, const SamplePath& barrier, double start) {
  require_same_grid(driver, barrier, "reflect_below");
  const std::size_t m = driver.size();
  ReflectionResult r{SamplePath(driver.grid()), SamplePath(driver.grid()), std::vector<bool>(m, false),
                     start - driver[0]};
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double excess = driver[i] + r.offset - barrier[i];
    if (excess > running) {
      running = excess;
      r.active[i] = true;
    }
    r.push[i] = running;
    r.path[i] = r.offset + driver[i] - running;
  }
  r.path[0] = start - r.push[0];
  return r;
}

// V_gamma(t) = (1/gamma) log(1 + gamma * int_a^t e^{gamma h(s)} ds), by
// log-space trapezoid. h is the barrier-minus-driver path.
inline SamplePath smoothed_reflection_term(const SamplePath& h, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  std::vector<double> log_f(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) log_f[i] = gamma * h[i];
  const auto log_int = logquad::cumulative_trapezoid(log_f, h.grid().dt());
  SamplePath v(h.grid());
  for (std::size_t i = 0; i < h.size(); ++i) v[i] = logquad::scaled_log1p(log_int[i], gamma);
  return v;
}

// V_inf(t) = max_{s <= t} h(s)_+, the gamma -> infinity limit of V_gamma.
inline SamplePath limiting_reflection_term(const SamplePath& h) {
  SamplePath v(h.grid());
  double running = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    running = std::max(running, h[i]);
    v[i] = running;
  }
  return v;
}

}  // namespace whittaker::skorokhod
