#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "whittaker/logquad.hpp"
#include "whittaker/model.hpp"
#include "whittaker/noise.hpp"
#include "whittaker/skorokhod.hpp"

// Time stepping and closed-form solvers for the scaled system
//
//   dT_{n,k} = dW_{n,k}/sqrt(gamma)
//              + (a_n + e^{gamma (T_{n-1,k} - T_{n,k})} - e^{gamma (T_{n,k} - T_{n-1,k-1})}) dt
//
// where the exponential terms vanish when the barrier index does not exist.
namespace whittaker::sde {

enum class Scheme { tamed_euler, exact_edge, reflected };

inline const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::tamed_euler: return "tamed-euler";
    case Scheme::exact_edge: return "exact-edge";
    case Scheme::reflected: return "reflected";
  }
  return "?";
}

inline Scheme parse_scheme(const std::string& s) {
  if (s == "tamed-euler") return Scheme::tamed_euler;
  if (s == "exact-edge") return Scheme::exact_edge;
  if (s == "reflected") return Scheme::reflected;
  throw ValidationError("unknown scheme '" + s + "'");
}

struct IntegratorSpec {
  Scheme scheme = Scheme::tamed_euler;
  double drift_cap = 0.0;  // D; 0 means take the cap from the ModelConfig

  double cap_for(const ModelConfig& config) const {
    const double d = drift_cap > 0.0 ? drift_cap : config.drift_cap;
    if (!(d > 0.0)) throw ValidationError("drift cap must be positive");
    return d;
  }
};

// Cutoff levels L_1 <= ... <= L_N for the truncated system.
struct TruncationLevels {
  std::vector<double> levels;

  static TruncationLevels uniform(int n, double value) {
    return {std::vector<double>(static_cast<std::size_t>(n), value)};
  }

  void check(int n) const {
    if (levels.size() != static_cast<std::size_t>(n)) throw ValidationError("need one cutoff per level");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      if (!(levels[i] >= 0.0)) throw ValidationError("cutoffs must be nonnegative");
      if (i > 0 && levels[i] < levels[i - 1]) throw ValidationError("cutoffs must be nondecreasing");
    }
  }

  // phi_L(x): x clipped to [-L, L] at the given level.
  double clip(double x, int level) const {
    const double l = levels[static_cast<std::size_t>(level - 1)];
    return std::clamp(x, -l, l);
  }
};

struct SimulationResult {
  PathBundle bundle;
  std::size_t clamps = 0;  // number of exponential terms replaced by the cap
};

namespace detail {

struct Identity {
  double operator()(double x, int) const { return x; }
};

struct Clip {
  const TruncationLevels* levels;
  double operator()(double x, int level) const { return levels->clip(x, level); }
};

// e^{exponent}, replaced by the cap above log(cap).
struct CappedExp {
  double cap;
  double log_cap;
  std::size_t clamps = 0;

  explicit CappedExp(double cap_) : cap(cap_), log_cap(std::log(cap_)) {}

  double operator()(double exponent) {
    if (exponent > log_cap) {
      ++clamps;
      return cap;
    }
    return std::exp(exponent);
  }
};

}  // namespace detail

// Explicit Euler step of the whole triangle: every particle reads the state at
// the start of the step; level n only reads level n - 1.
template <class Transform = detail::Identity>
class Stepper {
 public:
  Stepper(const ModelConfig& config, double dt, double cap, Transform transform = {})
      : config_(&config),
        dt_(dt),
        noise_scale_(1.0 / std::sqrt(config.gamma)),
        exp_(cap),
        transform_(transform),
        indices_(all_indices(config.levels)) {}

  // Drift of particle p given the state vector.
  double drift(std::span<const double> x, std::size_t p) {
    const TriIndex idx = indices_[p];
    const double g = config_->gamma;
    double d = config_->drift(idx.n);
    if (has_lower_barrier(idx)) {
      const double below = transform_(x[flat_index(lower_barrier(idx))], idx.n - 1);
      d += exp_(g * (below - transform_(x[p], idx.n)));
    }
    if (has_upper_barrier(idx)) {
      const double above = transform_(x[flat_index(upper_barrier(idx))], idx.n - 1);
      d -= exp_(g * (transform_(x[p], idx.n) - above));
    }
    return d;
  }

  void advance(std::span<const double> x, std::span<const double> dw, std::span<double> next) {
    for (std::size_t p = 0; p < x.size(); ++p) next[p] = x[p] + dw[p] * noise_scale_ + drift(x, p) * dt_;
  }

  std::size_t clamps() const { return exp_.clamps; }

 private:
  const ModelConfig* config_;
  double dt_;
  double noise_scale_;
  detail::CappedExp exp_;
  Transform transform_;
  std::vector<TriIndex> indices_;
};

namespace detail {

inline void check_inputs(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise) {
  config.check();
  if (!validate_initial(config.initial).ok())
    throw ValidationError("initial configuration violates interlacing");
  if (!(noise.grid() == grid)) throw ValidationError("noise grid does not match simulation grid");
  if (noise.levels() != config.levels) throw ValidationError("noise level count does not match model");
}

template <class Transform>
SimulationResult run_euler(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise,
                           double cap, Transform transform) {
  const std::size_t np = triangle_size(config.levels);
  Stepper<Transform> stepper(config, grid.dt(), cap, transform);
  PathBundle bundle(config.levels, grid);
  std::vector<double> x(config.initial.entries().begin(), config.initial.entries().end());
  std::vector<double> next(np), dw(np);
  for (std::size_t p = 0; p < np; ++p) bundle.path(p)[0] = x[p];
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    for (std::size_t p = 0; p < np; ++p) dw[p] = noise.increment(p, i);
    stepper.advance(x, dw, next);
    for (std::size_t p = 0; p < np; ++p) {
      if (!std::isfinite(next[p])) throw NonFiniteError(i + 1, p);
      bundle.path(p)[i + 1] = next[p];
    }
    x.swap(next);
  }
  return {std::move(bundle), stepper.clamps()};
}

// X(t) = W(t)/sqrt(gamma) + drift * (t - t_0).
inline SamplePath scaled_driver(const SamplePath& w, double gamma, double drift) {
  SamplePath x(w.grid());
  const double s = 1.0 / std::sqrt(gamma);
  for (std::size_t i = 0; i < w.size(); ++i) x[i] = w[i] * s + drift * (w.grid().time(i) - w.grid().start());
  return x;
}

// Closed form of dT = dX + e^{gamma (lower - T)} dt with T(a) = start:
//   T = c + X + (1/gamma) log(1 + gamma int_a^t e^{gamma (lower - X - c)} ds),  c = start - X(a).
inline SamplePath solve_pushed_up(const SamplePath& lower, const SamplePath& driver, double start, double gamma) {
  require_same_grid(lower, driver, "solve_edge_exact");
  const double c = start - driver[0];
  std::vector<double> log_f(lower.size());
  for (std::size_t i = 0; i < lower.size(); ++i) log_f[i] = gamma * (lower[i] - driver[i] - c);
  const auto log_int = logquad::cumulative_trapezoid(log_f, lower.grid().dt());
  SamplePath out(lower.grid());
  for (std::size_t i = 0; i < lower.size(); ++i) out[i] = c + driver[i] + logquad::scaled_log1p(log_int[i], gamma);
  out[0] = start;
  return out;
}

}  // namespace detail

// Edge particle pushed up by its lower neighbour, solved in closed form with
// log-space trapezoid quadrature. `noise` is the unscaled Brownian path W on
// the grid; the driver is W/sqrt(gamma) + drift * (t - a).
inline SamplePath solve_edge_exact(const SamplePath& lower, const SamplePath& noise, double start, double gamma,
                                   double drift = 0.0) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  return detail::solve_pushed_up(lower, detail::scaled_driver(noise, gamma, drift), start, gamma);
}

// Mirror of solve_edge_exact for an edge particle pushed down by its upper neighbour.
inline SamplePath solve_edge_exact_below(const SamplePath& upper, const SamplePath& noise, double start,
                                         double gamma, double drift = 0.0) {
  return -solve_edge_exact(-upper, -noise, -start, gamma, -drift);
}

// dT = dW/sqrt(gamma) + e^{gamma (phi_minus - T)} dt with T(a) = start.
inline SamplePath simulate_tilde0(const SamplePath& phi_minus, const SamplePath& noise, double start, double gamma) {
  return solve_edge_exact(phi_minus, noise, start, gamma);
}

// Euler path of one particle between fixed barriers:
//   dT = dW/sqrt(gamma) + (e^{gamma (lower - T)} - e^{gamma (T - upper)}) dt.
// Either barrier may be absent (nullptr). Increments are Normal(0, dt).
struct LocalPath {
  SamplePath path;
  std::size_t clamps = 0;
};

inline LocalPath simulate_between(const TimeGrid& grid, const SamplePath* lower, const SamplePath* upper,
                                  std::span<const double> increments, double start, double gamma, double cap,
                                  double drift = 0.0) {
  if (increments.size() != grid.steps()) throw ValidationError("need one increment per step");
  if (lower && !(lower->grid() == grid)) throw ValidationError("lower barrier grid mismatch");
  if (upper && !(upper->grid() == grid)) throw ValidationError("upper barrier grid mismatch");
  detail::CappedExp exp(cap);
  const double s = 1.0 / std::sqrt(gamma);
  const double dt = grid.dt();
  LocalPath out{SamplePath(grid), 0};
  double x = start;
  out.path[0] = x;
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    double d = drift;
    if (lower) d += exp(gamma * ((*lower)[i] - x));
    if (upper) d -= exp(gamma * (x - (*upper)[i]));
    x = x + increments[i] * s + d * dt;
    if (!std::isfinite(x)) throw NonFiniteError(i + 1, 0);
    out.path[i + 1] = x;
  }
  out.clamps = exp.clamps;
  return out;
}

namespace detail {

inline SimulationResult run_exact_edge(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise,
                                       double cap) {
  PathBundle bundle(config.levels, grid);
  std::size_t clamps = 0;
  for (int n = 1; n <= config.levels; ++n) {
    for (int k = 1; k <= n; ++k) {
      const TriIndex idx{n, k};
      const std::size_t p = flat_index(idx);
      const SamplePath w = noise.cumulative(p);
      const double start = config.initial[idx];
      const double a = config.drift(n);
      if (n == 1) {
        const SamplePath x = scaled_driver(w, config.gamma, a);
        for (std::size_t i = 0; i < grid.points(); ++i) bundle[idx][i] = start + x[i];
      } else if (k == 1) {
        bundle[idx] = solve_edge_exact(bundle[lower_barrier(idx)], w, start, config.gamma, a);
      } else if (k == n) {
        bundle[idx] = solve_edge_exact_below(bundle[upper_barrier(idx)], w, start, config.gamma, a);
      } else {
        // Interior particle: Euler between the already computed barriers.
        auto local = simulate_between(grid, &bundle[lower_barrier(idx)], &bundle[upper_barrier(idx)],
                                      noise.increments(p), start, config.gamma, cap, a);
        clamps += local.clamps;
        bundle[idx] = std::move(local.path);
      }
      if (!bundle[idx].finite()) throw NonFiniteError(0, p);
    }
  }
  return {std::move(bundle), clamps};
}

inline SimulationResult run_reflected(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise) {
  if (config.levels > 2)
    throw ValidationError("reflected scheme supports at most two levels (no interior particles)");
  PathBundle bundle(config.levels, grid);
  const SamplePath x11 = scaled_driver(noise.cumulative(0), config.gamma, config.drift(1));
  for (std::size_t i = 0; i < grid.points(); ++i) bundle[{1, 1}][i] = config.initial[{1, 1}] + x11[i];
  if (config.levels == 2) {
    const SamplePath x21 = scaled_driver(noise.cumulative(1), config.gamma, config.drift(2));
    const SamplePath x22 = scaled_driver(noise.cumulative(2), config.gamma, config.drift(2));
    bundle[{2, 1}] = skorokhod::reflect_above(x21, bundle[{1, 1}], config.initial[{2, 1}]).path;
    bundle[{2, 2}] = skorokhod::reflect_below(x22, bundle[{1, 1}], config.initial[{2, 2}]).path;
  }
  return {std::move(bundle), 0};
}

}  // namespace detail

// Simulate the full triangle on `grid` driven by `noise`.
//   tamed-euler: explicit Euler with every exponential term capped at the drift cap.
//   exact-edge:  edge particles by closed form, interior particles by capped Euler.
//   reflected:   the gamma -> infinity limit (Skorokhod maps); at most two levels.
inline SimulationResult simulate(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise,
                                 const IntegratorSpec& spec = {}) {
  detail::check_inputs(config, grid, noise);
  const double cap = spec.cap_for(config);
  switch (spec.scheme) {
    case Scheme::tamed_euler: return detail::run_euler(config, grid, noise, cap, detail::Identity{});
    case Scheme::exact_edge: return detail::run_exact_edge(config, grid, noise, cap);
    case Scheme::reflected: return detail::run_reflected(config, grid, noise);
  }
  throw ValidationError("unknown scheme");
}

// As simulate (tamed Euler), with every position inside a drift exponent
// replaced by phi_L(position) at that particle's level.
inline SimulationResult simulate_truncated(const ModelConfig& config, const TimeGrid& grid, const NoiseBundle& noise,
                                           const TruncationLevels& cutoffs, const IntegratorSpec& spec = {}) {
  detail::check_inputs(config, grid, noise);
  cutoffs.check(config.levels);
  return detail::run_euler(config, grid, noise, spec.cap_for(config), detail::Clip{&cutoffs});
}

struct EquivalenceGap {
  double gap = 0.0;
  double budget = 0.0;
  bool within() const { return gap <= budget; }
};

// Sup-norm gap between two coupled paths and the budget e^{-gamma eta / 2} (b - a).
inline EquivalenceGap equivalence_gap(const SamplePath& a, const SamplePath& b, double eta, double gamma) {
  return {sup_distance(a, b), std::exp(-gamma * eta / 2.0) * a.grid().length()};
}

// Bound on P(sup_{[0,T]} X^2 >= L^2) for dX = dW + (e^{Y1 - X} - e^{X - Y2}) dt,
// |Y1|, |Y2| <= C, X(0) = C0:
//   C1 = 1 + sup_{t>0} 2 t e^{C - t} = 1 + 2 e^{C - 1}
//   G  = C0^2 T + C1^2 T^2 / 2
//   bound = G / (L^2 - C1 T - C0^2)
struct EscapeBound {
  double c1 = 0.0;
  double g = 0.0;
  double bound = 0.0;
};

inline EscapeBound escape_probability_bound(double c0, double c, double level, double horizon) {
  const double c1 = 1.0 + 2.0 * std::exp(c - 1.0);
  const double g = c0 * c0 * horizon + 0.5 * c1 * c1 * horizon * horizon;
  const double denom = level * level - c1 * horizon - c0 * c0;
  if (!(denom > 0.0)) throw DomainError("escape bound is vacuous: L^2 <= C1 T + C0^2");
  return {c1, g, g / denom};
}

}  // namespace whittaker::sde
