#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "whittaker/model.hpp"
#include "whittaker/rate.hpp"

// Most-likely bundles between two interlaced configurations: projected
// gradient descent of the discretised total rate over interior grid values.
namespace whittaker::varopt {

struct VariationalProblem {
  int levels = 1;
  TimeGrid grid;
  TriangularConfiguration initial;
  TriangularConfiguration terminal;
  double eps = 1e-9;
  std::size_t max_iterations = 5000;
  double initial_step = 0.0;  // 0 means dt / 2
  double tolerance = 1e-12;   // stop when the relative decrease of an accepted step falls below this
  rate::Convention convention = rate::Convention::lemma;
};

struct ConvergenceReport {
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> history;  // rate after each accepted step, starting with the baseline
};

struct VariationalResult {
  PathBundle bundle;
  double rate = 0.0;
  double baseline_rate = 0.0;
  ConvergenceReport report;
};

// Straight lines from initial to terminal.
inline PathBundle linear_bundle(const TriangularConfiguration& initial, const TriangularConfiguration& terminal,
                                const TimeGrid& grid) {
  PathBundle b(initial.levels(), grid);
  for (std::size_t p = 0; p < b.size(); ++p) {
    const double x0 = initial.entries()[p], x1 = terminal.entries()[p];
    for (std::size_t i = 0; i < grid.points(); ++i) {
      const double w = (grid.time(i) - grid.start()) / grid.length();
      b.path(p)[i] = x0 + w * (x1 - x0);
    }
  }
  return b;
}

// Moves one time slice into the interlacing cone: sweeps that average each
// violating (barrier, particle) pair, then a final top-down clamp of every
// particle between its barriers so the result is always feasible.
inline void project_slice(std::vector<double>& x, int levels, std::size_t sweeps = 8) {
  auto at = [&](TriIndex idx) -> double& { return x[flat_index(idx)]; };
  for (std::size_t s = 0; s < sweeps; ++s) {
    bool moved = false;
    for (int n = 2; n <= levels; ++n) {
      for (int k = 1; k <= n; ++k) {
        const TriIndex idx{n, k};
        if (has_lower_barrier(idx) && at(idx) < at(lower_barrier(idx))) {
          const double m = 0.5 * (at(idx) + at(lower_barrier(idx)));
          at(idx) = at(lower_barrier(idx)) = m;
          moved = true;
        }
        if (has_upper_barrier(idx) && at(idx) > at(upper_barrier(idx))) {
          const double m = 0.5 * (at(idx) + at(upper_barrier(idx)));
          at(idx) = at(upper_barrier(idx)) = m;
          moved = true;
        }
      }
    }
    if (!moved) break;
  }
  for (int n = 2; n <= levels; ++n) {
    for (int k = 1; k <= n; ++k) {
      const TriIndex idx{n, k};
      if (has_lower_barrier(idx)) at(idx) = std::max(at(idx), at(lower_barrier(idx)));
      if (has_upper_barrier(idx)) at(idx) = std::min(at(idx), at(upper_barrier(idx)));
    }
  }
}

namespace detail {

// d/dv of the cell penalty 1/2 w(v)^2 for a cell label.
inline double penalty_slope(rate::Label label, double v, rate::Convention convention) {
  const bool lemma = convention == rate::Convention::lemma;
  switch (label) {
    case rate::Label::interior:
    case rate::Label::crossing: return v;
    case rate::Label::lower_coincident: return lemma ? std::min(v, 0.0) : std::max(v, 0.0);
    case rate::Label::upper_coincident: return lemma ? std::max(v, 0.0) : std::min(v, 0.0);
    case rate::Label::both_coincident: return 0.0;
  }
  return v;
}

inline double bundle_rate(const PathBundle& b, const VariationalProblem& prob) {
  return rate::total_rate(b, prob.initial, prob.eps, prob.convention).total;
}

}  // namespace detail

inline VariationalResult minimize_rate(const VariationalProblem& prob) {
  if (prob.initial.levels() != prob.levels || prob.terminal.levels() != prob.levels)
    throw ValidationError("endpoint configurations must have the problem's level count");
  if (!validate_initial(prob.initial).ok()) throw ValidationError("initial configuration is not interlaced");
  if (!validate_initial(prob.terminal).ok()) throw ValidationError("terminal configuration is not interlaced");

  const TimeGrid& grid = prob.grid;
  const std::size_t m = grid.steps();
  const double dt = grid.dt();
  const std::size_t np = triangle_size(prob.levels);

  VariationalResult out;
  out.bundle = linear_bundle(prob.initial, prob.terminal, grid);
  out.baseline_rate = out.rate = detail::bundle_rate(out.bundle, prob);
  out.report.history.push_back(out.rate);

  double step = prob.initial_step > 0.0 ? prob.initial_step : 0.5 * dt;
  std::vector<std::vector<double>> grad(np, std::vector<double>(m + 1, 0.0));
  std::vector<double> slice(np);

  for (std::size_t it = 0; it < prob.max_iterations; ++it) {
    out.report.iterations = it + 1;
    // Subgradient with cell labels frozen at the current iterate.
    double norm = 0.0;
    for (const TriIndex idx : all_indices(prob.levels)) {
      const SamplePath& phi = out.bundle[idx];
      const SamplePath* up = has_upper_barrier(idx) ? &out.bundle[upper_barrier(idx)] : nullptr;
      const SamplePath* lo = has_lower_barrier(idx) ? &out.bundle[lower_barrier(idx)] : nullptr;
      const auto cls = rate::classify(phi, up, lo, prob.eps);
      auto& g = grad[flat_index(idx)];
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t c = 0; c < m; ++c) {
        const double s = detail::penalty_slope(cls.cells[c], (phi[c + 1] - phi[c]) / dt, prob.convention);
        g[c + 1] += s;
        g[c] -= s;
      }
      g.front() = g.back() = 0.0;
      for (double v : g) norm = std::max(norm, std::abs(v));
    }
    if (norm == 0.0) {
      out.report.converged = true;
      break;
    }

    bool accepted = false;
    while (step > 1e-16 * dt) {
      PathBundle trial = out.bundle;
      for (std::size_t p = 0; p < np; ++p)
        for (std::size_t i = 1; i < m; ++i) trial.path(p)[i] -= step * grad[p][i];
      for (std::size_t i = 1; i < m; ++i) {
        for (std::size_t p = 0; p < np; ++p) slice[p] = trial.path(p)[i];
        project_slice(slice, prob.levels);
        for (std::size_t p = 0; p < np; ++p) trial.path(p)[i] = slice[p];
      }
      const double r = detail::bundle_rate(trial, prob);
      if (r <= out.rate) {
        const double decrease = out.rate - r;
        out.bundle = std::move(trial);
        out.rate = r;
        out.report.history.push_back(r);
        accepted = true;
        step *= 1.25;
        if (decrease <= prob.tolerance * std::max(out.rate, 1e-300)) out.report.converged = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      out.report.converged = true;
      break;
    }
    if (out.report.converged) break;
  }
  return out;
}

}  // namespace whittaker::varopt
