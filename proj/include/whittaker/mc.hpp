#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "whittaker/model.hpp"
#include "whittaker/noise.hpp"
#include "whittaker/rate.hpp"
#include "whittaker/sde.hpp"

// Monte Carlo experiments. Replicate r of an experiment with seed s always
// uses noise Seed{s, r}, so results do not depend on the worker count.
namespace whittaker::mc {

// Worker count: explicit request, else $WHITTAKER_THREADS, else hardware concurrency.
inline unsigned resolve_threads(unsigned requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("WHITTAKER_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// f(i) for i in [0, n), evaluated on `threads` workers; results in index order.
template <class F>
auto parallel_map(std::size_t n, unsigned threads, F&& f) {
  using R = decltype(f(std::size_t{0}));
  std::vector<R> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(std::max(1u, threads), std::max<std::size_t>(n, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) out[i] = f(i);
    });
  }
  for (auto& t : pool) t.join();
  return out;
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;

  friend bool operator==(const Interval&, const Interval&) = default;
};

inline constexpr double kZ95 = 1.959963984540054;

// Wilson score interval for k successes out of n.
inline Interval wilson_interval(std::size_t k, std::size_t n, double z = kZ95) {
  if (n == 0) throw EmptySampleError("Wilson interval of an empty sample");
  const double nn = static_cast<double>(n);
  const double p = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (p + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

struct EstimatorResult {
  double p_hat = 0.0;
  Interval wilson;
  std::size_t n_samples = 0;
  std::size_t hits = 0;
  double gamma = 0.0;
  double delta = 0.0;
  double clamp_contamination = 0.0;  // fraction of replicates where a drift term hit the cap

  bool trusted() const { return clamp_contamination <= 0.01; }
  friend bool operator==(const EstimatorResult&, const EstimatorResult&) = default;
};

namespace detail {

struct ReplicateOutcome {
  bool hit = false;
  bool clamped = false;
};

inline EstimatorResult summarise(const std::vector<ReplicateOutcome>& outcomes, double gamma, double delta) {
  EstimatorResult r;
  r.n_samples = outcomes.size();
  std::size_t clamped = 0;
  for (const auto& o : outcomes) {
    r.hits += o.hit ? 1 : 0;
    clamped += o.clamped ? 1 : 0;
  }
  r.p_hat = static_cast<double>(r.hits) / static_cast<double>(r.n_samples);
  r.wilson = wilson_interval(r.hits, r.n_samples);
  r.gamma = gamma;
  r.delta = delta;
  r.clamp_contamination = static_cast<double>(clamped) / static_cast<double>(r.n_samples);
  return r;
}

// One tamed-Euler replicate, stepped with on-the-fly noise. `visit(step, x)`
// is called at every grid point (step 0 included) and returns false to stop.
template <class Visit>
std::size_t run_replicate(const ModelConfig& config, const TimeGrid& grid, const Seed& seed, Visit&& visit) {
  const std::size_t np = triangle_size(config.levels);
  sde::Stepper<> stepper(config, grid.dt(), config.drift_cap);
  noise::IncrementStream stream(seed, np, grid.dt());
  std::vector<double> x(config.initial.entries().begin(), config.initial.entries().end());
  std::vector<double> next(np), dw(np);
  if (!visit(std::size_t{0}, std::span<const double>(x))) return stepper.clamps();
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    stream.fill(i, dw);
    stepper.advance(x, dw, next);
    for (std::size_t p = 0; p < np; ++p)
      if (!std::isfinite(next[p])) throw NonFiniteError(i + 1, p);
    x.swap(next);
    if (!visit(i + 1, std::span<const double>(x))) break;
  }
  return stepper.clamps();
}

}  // namespace detail

// Fraction of replicates whose every particle stays within delta of phi in
// grid sup-norm. The simulation grid is phi's grid.
inline EstimatorResult smallball_probability(const ModelConfig& config, const PathBundle& phi, double delta,
                                             std::size_t n_samples, std::uint64_t seed, unsigned threads = 0) {
  if (n_samples == 0) throw EmptySampleError("small-ball estimate needs at least one replicate");
  config.check();
  if (phi.levels() != config.levels) throw ValidationError("target bundle level mismatch");
  const TimeGrid grid = phi.grid();
  const std::size_t np = phi.size();
  auto outcomes = parallel_map(n_samples, resolve_threads(threads), [&](std::size_t r) {
    bool inside = true;
    const std::size_t clamps = detail::run_replicate(config, grid, Seed{seed, r}, [&](std::size_t i, std::span<const double> x) {
      for (std::size_t p = 0; p < np; ++p) {
        if (std::abs(x[p] - phi.path(p)[i]) > delta) {
          inside = false;
          return false;
        }
      }
      return true;
    });
    return detail::ReplicateOutcome{inside, clamps > 0};
  });
  return detail::summarise(outcomes, config.gamma, delta);
}

// Samples of one particle's value at the end of the grid.
inline std::vector<double> terminal_values(const ModelConfig& config, const TimeGrid& grid, TriIndex particle,
                                           std::size_t n_samples, std::uint64_t seed, unsigned threads = 0) {
  config.check();
  const std::size_t p = flat_index(particle);
  return parallel_map(n_samples, resolve_threads(threads), [&](std::size_t r) {
    double last = 0.0;
    detail::run_replicate(config, grid, Seed{seed, r}, [&](std::size_t i, std::span<const double> x) {
      if (i == grid.steps()) last = x[p];
      return true;
    });
    return last;
  });
}

// ---------------------------------------------------------------------------
// LDP slope

struct SlopeFit {
  std::vector<double> gammas;
  std::vector<EstimatorResult> estimates;
  std::vector<double> minus_log_p;  // NaN where p_hat = 0
  double slope = 0.0;
  double intercept = 0.0;
  std::size_t usable = 0;
  double predicted = 0.0;  // discretised I(phi) of the target bundle
};

// Least-squares line through (x, y).
inline std::pair<double, double> least_squares(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() < 2) throw DegenerateFitError("need at least two points for a line fit");
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) throw DegenerateFitError("abscissae are all equal");
  const double slope = (n * sxy - sx * sy) / den;
  return {slope, (sy - slope * sx) / n};
}

// Fits -log p_hat(gamma) = slope * gamma + intercept over gammas with p_hat > 0.
// Each gamma uses the template config with its own gamma and default drift cap.
inline SlopeFit ldp_slope(const ModelConfig& templ, const PathBundle& phi, double delta,
                          const std::vector<double>& gammas, std::size_t n_samples, std::uint64_t seed,
                          unsigned threads = 0, double cap_exponent = kDefaultCapExponent) {
  SlopeFit fit;
  fit.gammas = gammas;
  std::vector<double> xs, ys;
  for (double g : gammas) {
    ModelConfig c = templ;
    c.gamma = g;
    c.drift_cap = std::exp(g * cap_exponent);
    auto est = smallball_probability(c, phi, delta, n_samples, seed, threads);
    const double y = est.hits > 0 ? -std::log(est.p_hat) : std::nan("");
    fit.minus_log_p.push_back(y);
    fit.estimates.push_back(est);
    if (est.hits > 0) {
      xs.push_back(g);
      ys.push_back(y);
    }
  }
  fit.usable = xs.size();
  if (xs.size() < 2) throw DegenerateFitError("fewer than two gammas with nonzero hits");
  std::tie(fit.slope, fit.intercept) = least_squares(xs, ys);
  const double eps = rate::default_coincidence_eps(phi.grid().dt(), gammas.empty() ? 1.0 : gammas.back());
  fit.predicted = rate::total_rate(phi, templ.initial, eps).total;
  return fit;
}

// ---------------------------------------------------------------------------
// Interlacing events

struct InterlaceFrequency {
  double gamma = 0.0;
  double f = 0.0;  // base margin f_1 actually used
  std::size_t n_samples = 0;
  std::size_t a_violations = 0;
  std::size_t b_violations = 0;
  std::size_t c_violations = 0;
  double clamp_contamination = 0.0;

  double freq(std::size_t v) const { return static_cast<double>(v) / static_cast<double>(n_samples); }
  Interval ci(std::size_t v) const { return wilson_interval(v, n_samples); }
};

// Per gamma, the fraction of replicates in which some A_n, B_n or C_n fails
// over the grid, with f = margin_scale / sqrt(gamma).
inline std::vector<InterlaceFrequency> interlace_event_frequency(const ModelConfig& templ, const TimeGrid& grid,
                                                                 const std::vector<double>& gammas,
                                                                 std::size_t n_samples, std::uint64_t seed,
                                                                 unsigned threads = 0, double margin_scale = 1.0,
                                                                 double cap_exponent = kDefaultCapExponent) {
  if (n_samples == 0) throw EmptySampleError("interlacing frequency needs at least one replicate");
  // Relation list from an empty report: same ordering as interlacing_defect.
  const auto relations = interlacing_defect(PathBundle::constant(templ.initial, grid), 1.0).relations;
  std::vector<InterlaceFrequency> out;
  for (double g : gammas) {
    ModelConfig c = templ;
    c.gamma = g;
    c.drift_cap = std::exp(g * cap_exponent);
    const auto bounds = InterlaceBounds::from_f(margin_scale / std::sqrt(g));
    struct Flags {
      bool a = false, b = false, c = false, clamped = false;
    };
    auto flags = parallel_map(n_samples, resolve_threads(threads), [&](std::size_t r) {
      Flags fl;
      const std::size_t clamps = detail::run_replicate(c, grid, Seed{seed, r}, [&](std::size_t, std::span<const double> x) {
        for (const auto& rel : relations) {
          const double margin = rel.family == EventFamily::A ? bounds.f_level(rel.event_level) : bounds.g_level(rel.event_level);
          if (x[flat_index(rel.larger)] - x[flat_index(rel.smaller)] < -margin) {
            (rel.family == EventFamily::A ? fl.a : rel.family == EventFamily::B ? fl.b : fl.c) = true;
          }
        }
        return true;
      });
      fl.clamped = clamps > 0;
      return fl;
    });
    InterlaceFrequency f{g, bounds.f, n_samples};
    std::size_t clamped = 0;
    for (const auto& fl : flags) {
      f.a_violations += fl.a;
      f.b_violations += fl.b;
      f.c_violations += fl.c;
      clamped += fl.clamped;
    }
    f.clamp_contamination = static_cast<double>(clamped) / static_cast<double>(n_samples);
    out.push_back(f);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Exponential equivalence of the two-barrier particle and its one-barrier proxy

struct EquivalenceSetup {
  SamplePath lower;  // phi^-
  SamplePath upper;  // phi^+
  double start = 0.0;
};

// Barriers for the coupled experiment: phi^-(t) = -0.15 + 0.1 sin(2 pi t),
// phi^+(t) = 2 eta + 0.1 (t - a), start 0.
inline EquivalenceSetup default_equivalence_setup(const TimeGrid& grid, double eta) {
  constexpr double kTwoPi = 6.283185307179586;
  return {SamplePath::from_function(grid, [](double t) { return -0.15 + 0.1 * std::sin(kTwoPi * t); }),
          SamplePath::from_function(grid, [&](double t) { return 2.0 * eta + 0.1 * (t - grid.start()); }), 0.0};
}

struct EquivalenceReport {
  std::size_t n_samples = 0;
  std::size_t in_tube = 0;     // replicates with T <= phi^+ - eta on the whole grid
  std::size_t violations = 0;  // in-tube replicates whose sup gap exceeds the budget
  std::size_t ordering_failures = 0;  // in-tube replicates where T > proxy somewhere (beyond 1e-12)
  double budget = 0.0;         // e^{-gamma eta / 2} (b - a)
  double max_gap_in_tube = 0.0;
};

// Couples dT = dW/sqrt(g) + (e^{g(phi^- - T)} - e^{g(T - phi^+)}) dt with the
// proxy dT0 = dW/sqrt(g) + e^{g(phi^- - T0)} dt under the same noise, both by
// capped Euler on `grid`.
inline EquivalenceReport equivalence_experiment(double gamma, double eta, const TimeGrid& grid,
                                                std::size_t n_samples, std::uint64_t seed, unsigned threads = 0,
                                                const EquivalenceSetup* setup = nullptr) {
  if (n_samples == 0) throw EmptySampleError("equivalence experiment needs at least one replicate");
  if (!(eta >= 0.0)) throw ValidationError("barrier clearance must be nonnegative");
  const EquivalenceSetup local = setup ? *setup : default_equivalence_setup(grid, eta);
  const double cap = std::exp(gamma * kDefaultCapExponent);
  EquivalenceReport rep;
  rep.n_samples = n_samples;
  rep.budget = std::exp(-gamma * eta / 2.0) * grid.length();
  struct Outcome {
    bool in_tube = false;
    bool ordered = true;
    double gap = 0.0;
  };
  auto outcomes = parallel_map(n_samples, resolve_threads(threads), [&](std::size_t r) {
    std::vector<double> inc(grid.steps());
    noise::IncrementStream stream(Seed{seed, r}, 1, grid.dt());
    for (std::size_t i = 0; i < grid.steps(); ++i) stream.fill(i, std::span<double>(&inc[i], 1));
    const auto t = sde::simulate_between(grid, &local.lower, &local.upper, inc, local.start, gamma, cap);
    const auto t0 = sde::simulate_between(grid, &local.lower, nullptr, inc, local.start, gamma, cap);
    Outcome o;
    o.in_tube = true;
    for (std::size_t i = 0; i < grid.points(); ++i) {
      if (t.path[i] > local.upper[i] - eta) o.in_tube = false;
      if (t0.path[i] - t.path[i] < -1e-12) o.ordered = false;
    }
    o.gap = sup_distance(t.path, t0.path);
    return o;
  });
  for (const auto& o : outcomes) {
    if (!o.in_tube) continue;
    ++rep.in_tube;
    rep.max_gap_in_tube = std::max(rep.max_gap_in_tube, o.gap);
    if (o.gap > rep.budget) ++rep.violations;
    if (!o.ordered) ++rep.ordering_failures;
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Escape frequency for the two-barrier particle with bounded barriers

struct EscapeReport {
  std::size_t n_samples = 0;
  std::size_t escapes = 0;
  double p_hat = 0.0;
  double standard_error = 0.0;
  double bound = 0.0;
};

// dX = dW + (e^{-C - X} - e^{X - C}) dt, X(0) = C0, on [0, T]; an escape is
// sup X^2 >= L^2 on the grid. Barriers sit at -C and +C, the extremes allowed.
inline EscapeReport escape_experiment(double c0, double c, double level, double horizon, double dt,
                                      std::size_t n_samples, std::uint64_t seed, unsigned threads = 0) {
  if (n_samples == 0) throw EmptySampleError("escape experiment needs at least one replicate");
  EscapeReport rep;
  rep.n_samples = n_samples;
  rep.bound = sde::escape_probability_bound(c0, c, level, horizon).bound;
  const TimeGrid grid = TimeGrid::with_spacing(0.0, horizon, dt);
  const SamplePath lower(grid, -c), upper(grid, c);
  const double cap = std::exp(level + c + 1.0);
  auto escaped = parallel_map(n_samples, resolve_threads(threads), [&](std::size_t r) {
    std::vector<double> inc(grid.steps());
    noise::IncrementStream stream(Seed{seed, r}, 1, grid.dt());
    for (std::size_t i = 0; i < grid.steps(); ++i) stream.fill(i, std::span<double>(&inc[i], 1));
    const auto x = sde::simulate_between(grid, &lower, &upper, inc, c0, 1.0, cap);
    for (double v : x.path.values())
      if (v * v >= level * level) return 1;
    return 0;
  });
  for (int e : escaped) rep.escapes += static_cast<std::size_t>(e);
  rep.p_hat = static_cast<double>(rep.escapes) / static_cast<double>(n_samples);
  rep.standard_error = std::sqrt(rep.p_hat * (1.0 - rep.p_hat) / static_cast<double>(n_samples));
  return rep;
}

}  // namespace whittaker::mc
