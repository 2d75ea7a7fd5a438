#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "whittaker/model.hpp"
#include "whittaker/skorokhod.hpp"

// Discretised rate functional of the triangular system.
//
// For one particle with optional upper barrier u and lower barrier l the rate is
//   1/2 int_{u > phi > l} phidot^2
//   + 1/2 int_{phi = l} (phidot)_-^2 + 1/2 int_{phi = u} (phidot)_+^2
// and +inf if phi(0) differs from the initial value or phi crosses a barrier.
// On the grid, phidot is the forward difference of each cell and the cell's
// coincidence label (midpoint comparison within eps) selects its penalty.
namespace whittaker::rate {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

enum class Label { interior, upper_coincident, lower_coincident, both_coincident, crossing };

// Which one-sided penalty each coincidence set uses. `lemma` charges descent
// on the lower barrier and ascent on the upper barrier; `theorem` swaps them.
enum class Convention { lemma, theorem };

inline Convention parse_convention(const std::string& s) {
  if (s == "lemma") return Convention::lemma;
  if (s == "theorem") return Convention::theorem;
  throw ValidationError("unknown convention '" + s + "'");
}

enum class InfinityReason { none, crossing, initial_mismatch };

inline const char* to_string(InfinityReason r) {
  switch (r) {
    case InfinityReason::none: return "none";
    case InfinityReason::crossing: return "crossing";
    case InfinityReason::initial_mismatch: return "initial-mismatch";
  }
  return "?";
}

struct CoincidenceClassification {
  std::vector<Label> cells;  // one per grid cell [t_i, t_{i+1}]
  double eps = 0.0;

  bool any_crossing() const {
    return std::find(cells.begin(), cells.end(), Label::crossing) != cells.end();
  }
  std::size_t count(Label l) const { return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), l)); }
};

// eps = 2 sqrt(dt / gamma)
inline double default_coincidence_eps(double dt, double gamma) { return 2.0 * std::sqrt(dt / gamma); }

// A cell crosses if either endpoint lies more than eps outside a barrier.
// Otherwise it is coincident with a barrier whose midpoint is within eps of
// phi's midpoint. An absent barrier (nullptr) never touches.
inline CoincidenceClassification classify(const SamplePath& phi, const SamplePath* upper, const SamplePath* lower,
                                          double eps) {
  if (upper) require_same_grid(phi, *upper, "classify");
  if (lower) require_same_grid(phi, *lower, "classify");
  CoincidenceClassification out{std::vector<Label>(phi.grid().steps(), Label::interior), eps};
  auto outside = [&](std::size_t j) {
    return (upper && phi[j] > (*upper)[j] + eps) || (lower && phi[j] < (*lower)[j] - eps);
  };
  for (std::size_t i = 0; i < out.cells.size(); ++i) {
    if (outside(i) || outside(i + 1)) {
      out.cells[i] = Label::crossing;
      continue;
    }
    const double mid = 0.5 * (phi[i] + phi[i + 1]);
    const bool on_upper = upper && std::abs(mid - 0.5 * ((*upper)[i] + (*upper)[i + 1])) <= eps;
    const bool on_lower = lower && std::abs(mid - 0.5 * ((*lower)[i] + (*lower)[i + 1])) <= eps;
    out.cells[i] = on_upper && on_lower ? Label::both_coincident
                   : on_upper           ? Label::upper_coincident
                   : on_lower           ? Label::lower_coincident
                                        : Label::interior;
  }
  return out;
}

inline double positive_part(double x) { return std::max(x, 0.0); }
inline double negative_part(double x) { return std::max(-x, 0.0); }

// Per-particle contributions. Terms are actions (1/2 sum penalty * dt);
// measures are the Lebesgue measure of each cell class.
struct ParticleRate {
  TriIndex index;
  double interior_term = 0.0;
  double upper_term = 0.0;
  double lower_term = 0.0;
  double interior_measure = 0.0;
  double upper_measure = 0.0;
  double lower_measure = 0.0;
  double both_measure = 0.0;
  double crossing_measure = 0.0;
  InfinityReason reason = InfinityReason::none;

  bool finite() const { return reason == InfinityReason::none; }
  double total() const { return finite() ? interior_term + upper_term + lower_term : kInfinity; }
};

namespace detail {

inline void accumulate(ParticleRate& r, const SamplePath& phi, const CoincidenceClassification& cls,
                       Convention convention) {
  const double dt = phi.grid().dt();
  for (std::size_t i = 0; i < cls.cells.size(); ++i) {
    const double v = (phi[i + 1] - phi[i]) / dt;
    const double descent = negative_part(v), ascent = positive_part(v);
    const bool lemma = convention == Convention::lemma;
    switch (cls.cells[i]) {
      case Label::interior:
        r.interior_term += 0.5 * v * v * dt;
        r.interior_measure += dt;
        break;
      case Label::lower_coincident: {
        const double w = lemma ? descent : ascent;
        r.lower_term += 0.5 * w * w * dt;
        r.lower_measure += dt;
        break;
      }
      case Label::upper_coincident: {
        const double w = lemma ? ascent : descent;
        r.upper_term += 0.5 * w * w * dt;
        r.upper_measure += dt;
        break;
      }
      case Label::both_coincident: r.both_measure += dt; break;
      case Label::crossing: r.crossing_measure += dt; break;
    }
  }
}

}  // namespace detail

inline ParticleRate particle_rate(const SamplePath& phi, const SamplePath* upper, const SamplePath* lower,
                                  double eps, double initial_value, Convention convention = Convention::lemma) {
  ParticleRate r;
  const auto cls = classify(phi, upper, lower, eps);
  detail::accumulate(r, phi, cls, convention);
  if (std::abs(phi[0] - initial_value) > eps)
    r.reason = InfinityReason::initial_mismatch;
  else if (cls.any_crossing())
    r.reason = InfinityReason::crossing;
  return r;
}

// J(phi | phi_minus): phi pushed up by a lower barrier.
inline double local_rate_lower(const SamplePath& phi, const SamplePath& phi_minus, double eps) {
  ParticleRate r;
  const auto cls = classify(phi, nullptr, &phi_minus, eps);
  if (cls.any_crossing()) return kInfinity;
  detail::accumulate(r, phi, cls, Convention::lemma);
  return r.total();
}

// J(phi | phi_plus): phi pushed down by an upper barrier.
inline double local_rate_upper(const SamplePath& phi, const SamplePath& phi_plus, double eps) {
  ParticleRate r;
  const auto cls = classify(phi, &phi_plus, nullptr, eps);
  if (cls.any_crossing()) return kInfinity;
  detail::accumulate(r, phi, cls, Convention::lemma);
  return r.total();
}

// 1/2 sum phidot^2 dt: the free Brownian action.
inline double schilder_rate(const SamplePath& phi, double initial_value, double eps = 0.0) {
  if (std::abs(phi[0] - initial_value) > eps) return kInfinity;
  const double dt = phi.grid().dt();
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < phi.size(); ++i) {
    const double v = (phi[i + 1] - phi[i]) / dt;
    s += 0.5 * v * v * dt;
  }
  return s;
}

struct RateBreakdown {
  std::vector<ParticleRate> particles;  // flat order
  double total = 0.0;
  InfinityReason reason = InfinityReason::none;

  bool finite() const { return reason == InfinityReason::none; }
};

// Sum of particle rates; particle (n,k) uses (n-1,k-1) as upper and (n-1,k) as lower barrier.
inline RateBreakdown total_rate(const PathBundle& bundle, const TriangularConfiguration& initial, double eps,
                                Convention convention = Convention::lemma) {
  if (initial.levels() != bundle.levels()) throw ValidationError("initial configuration level mismatch");
  RateBreakdown out;
  for (const TriIndex idx : all_indices(bundle.levels())) {
    const SamplePath* up = has_upper_barrier(idx) ? &bundle[upper_barrier(idx)] : nullptr;
    const SamplePath* lo = has_lower_barrier(idx) ? &bundle[lower_barrier(idx)] : nullptr;
    auto r = particle_rate(bundle[idx], up, lo, eps, initial[idx], convention);
    r.index = idx;
    if (!r.finite() && out.finite()) out.reason = r.reason;
    out.particles.push_back(r);
  }
  out.total = 0.0;
  if (out.finite())
    for (const auto& p : out.particles) out.total += p.total();
  else
    out.total = kInfinity;
  return out;
}

inline RateBreakdown total_rate(const PathBundle& bundle, const ModelConfig& config, double eps,
                                Convention convention = Convention::lemma) {
  return total_rate(bundle, config.initial, eps, convention);
}

// ---------------------------------------------------------------------------
// Brute-force oracle for J(phi | phi_minus)
//
// Minimises 1/2 sum psidot^2 dt over drivers psi with
// reflect_above(psi, phi_minus, phi(a)) == phi. Writing psi = phi - phi(a) - s,
// the push s must start at 0, be nondecreasing, and may only grow into grid
// points where phi touches the barrier. That set is convex; the quadratic
// objective is minimised over it with accelerated projected gradient, and the
// resulting driver is pushed through the reflection map to confirm it
// reproduces phi.

struct OracleResult {
  double rate = 0.0;
  SamplePath driver;
  std::size_t iterations = 0;
  double feasibility_gap = 0.0;
};

namespace detail {

// Euclidean projection onto {s_0 = 0, s nondecreasing, s constant between
// touch points}: weighted pool-adjacent-violators over blocks.
inline void project_push(std::vector<double>& s, const std::vector<bool>& touch) {
  struct Block {
    double sum;
    double weight;
    std::size_t begin;
    std::size_t end;
    bool pinned;
    double value() const { return pinned ? 0.0 : sum / weight; }
  };
  std::vector<Block> stack;
  std::size_t i = 0;
  while (i < s.size()) {
    std::size_t j = i + 1;
    while (j < s.size() && !touch[j]) ++j;
    Block b{0.0, 0.0, i, j, i == 0};
    for (std::size_t q = i; q < j; ++q) b.sum += s[q];
    b.weight = static_cast<double>(j - i);
    stack.push_back(b);
    while (stack.size() > 1 && stack[stack.size() - 2].value() > stack.back().value()) {
      Block top = stack.back();
      stack.pop_back();
      Block& prev = stack.back();
      prev.sum += top.sum;
      prev.weight += top.weight;
      prev.end = top.end;
      prev.pinned = prev.pinned || top.pinned;
    }
    i = j;
  }
  for (const auto& b : stack)
    for (std::size_t q = b.begin; q < b.end; ++q) s[q] = b.value();
}

}  // namespace detail

inline OracleResult brute_force_local_rate(const SamplePath& phi, const SamplePath& phi_minus,
                                           std::size_t coarse_steps = 64, double touch_tol = 1e-9,
                                           std::size_t max_iterations = 200000) {
  require_same_grid(phi, phi_minus, "brute_force_local_rate");
  if (coarse_steps == 0 || coarse_steps > 64) throw ValidationError("coarse grid must have 1..64 steps");
  const std::size_t fine = phi.grid().steps();
  if (fine % coarse_steps != 0) throw ValidationError("coarse grid must divide the input grid");
  const std::size_t stride = fine / coarse_steps;
  const TimeGrid grid(phi.grid().start(), phi.grid().end(), coarse_steps);
  SamplePath x(grid), b(grid);
  for (std::size_t i = 0; i < grid.points(); ++i) {
    x[i] = phi[i * stride];
    b[i] = phi_minus[i * stride];
  }

  const std::size_t m = grid.steps();
  const double dt = grid.dt();
  std::vector<bool> touch(m + 1, false);
  for (std::size_t i = 0; i <= m; ++i) {
    if (x[i] < b[i] - touch_tol) throw InfeasibleError("path lies below the barrier at grid point " + std::to_string(i));
    touch[i] = x[i] <= b[i] + touch_tol;
  }

  auto gradient = [&](const std::vector<double>& s, std::vector<double>& g) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ((x[i + 1] - x[i]) - (s[i + 1] - s[i])) / dt;
      g[i] += r;
      g[i + 1] -= r;
    }
  };
  auto objective = [&](const std::vector<double>& s) {
    double f = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double r = ((x[i + 1] - x[i]) - (s[i + 1] - s[i])) / dt;
      f += 0.5 * r * r * dt;
    }
    return f;
  };

  const double step = dt / 4.0;  // 1 / Lipschitz constant of the gradient
  std::vector<double> s(m + 1, 0.0), prev = s, y = s, g(m + 1);
  double momentum = 1.0;
  double f_prev = objective(s);
  std::size_t it = 0;
  for (; it < max_iterations; ++it) {
    gradient(y, g);
    prev = s;
    for (std::size_t q = 0; q <= m; ++q) s[q] = y[q] - step * g[q];
    detail::project_push(s, touch);
    const double f = objective(s);
    // Restart momentum whenever the objective goes up.
    if (f > f_prev) {
      momentum = 1.0;
      y = s = prev;
      continue;
    }
    double change = 0.0;
    for (std::size_t q = 0; q <= m; ++q) change = std::max(change, std::abs(s[q] - prev[q]));
    const double next_m = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * momentum * momentum));
    for (std::size_t q = 0; q <= m; ++q) y[q] = s[q] + ((momentum - 1.0) / next_m) * (s[q] - prev[q]);
    momentum = next_m;
    f_prev = f;
    if (change < 1e-15 && it > 10) break;
  }

  SamplePath driver(grid);
  for (std::size_t i = 0; i <= m; ++i) driver[i] = x[i] - x[0] - s[i];
  const auto mapped = skorokhod::reflect_above(driver, b, x[0]);
  const double gap = sup_distance(mapped.path, x);
  if (gap > 1e-6 + 10.0 * touch_tol)
    throw InfeasibleError("no driver reproduces the path (gap " + std::to_string(gap) + ")");
  return {schilder_rate(driver, 0.0), driver, it, gap};
}

}  // namespace whittaker::rate
