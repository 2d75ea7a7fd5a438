#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "whittaker/model.hpp"

namespace support {

inline whittaker::SamplePath random_walk(std::mt19937_64& rng, const whittaker::TimeGrid& grid, double scale,
                                         double start = 0.0) {
  std::normal_distribution<double> z(0.0, 1.0);
  whittaker::SamplePath p(grid);
  p[0] = start;
  const double s = scale * std::sqrt(grid.dt());
  for (std::size_t i = 1; i < p.size(); ++i) p[i] = p[i - 1] + s * z(rng);
  return p;
}

// Interlaced configuration: each level drawn so that
// T_{n+1,k+1} <= T_{n,k} <= T_{n+1,k}.
inline whittaker::TriangularConfiguration random_interlaced(std::mt19937_64& rng, int levels) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  whittaker::TriangularConfiguration c(levels);
  c[{1, 1}] = u(rng) - 0.5;
  for (int n = 2; n <= levels; ++n) {
    c[{n, 1}] = c[{n - 1, 1}] + u(rng);
    c[{n, n}] = c[{n - 1, n - 1}] - u(rng);
    for (int k = 2; k < n; ++k) {
      const double lo = c[{n - 1, k}], hi = c[{n - 1, k - 1}];
      c[{n, k}] = lo + u(rng) * (hi - lo);
    }
  }
  return c;
}

}  // namespace support

namespace support {

// A piecewise-linear pair (phi, phi_minus) with breakpoints on grid points.
// phi alternates between stretches glued to phi_minus and tent-shaped
// excursions above it. Each tent comes back down steeply enough that phi is
// nonincreasing on the cell that re-enters coincidence.
struct LocalPair {
  whittaker::SamplePath phi;
  whittaker::SamplePath phi_minus;
};

inline LocalPair random_local_pair(std::mt19937_64& rng, const whittaker::TimeGrid& grid) {
  const std::size_t m = grid.steps();
  const double dt = grid.dt();
  std::uniform_real_distribution<double> slope(-1.5, 1.5);
  std::uniform_int_distribution<std::size_t> seg_len(4, std::max<std::size_t>(m / 4, 5));

  whittaker::SamplePath b(grid);
  b[0] = slope(rng);
  double s = slope(rng);
  std::size_t next_break = seg_len(rng);
  double max_slope = std::abs(s);
  for (std::size_t i = 1; i <= m; ++i) {
    if (i == next_break) {
      s = slope(rng);
      next_break += seg_len(rng);
    }
    max_slope = std::max(max_slope, std::abs(s));
    b[i] = b[i - 1] + s * dt;
  }

  whittaker::SamplePath phi = b;
  std::bernoulli_distribution glued(0.5);
  std::uniform_real_distribution<double> extra(0.2, 1.0);
  bool any_free = false;
  std::size_t i = 0;
  while (i < m) {
    std::size_t len = std::min(seg_len(rng) + (seg_len(rng) % 2), m - i);
    if (len < 2) break;
    len -= len % 2;
    if (!glued(rng) || (!any_free && i + len >= m)) {
      any_free = true;
      const double h = max_slope + extra(rng);
      for (std::size_t q = 0; q <= len; ++q) {
        const double up = static_cast<double>(std::min(q, len - q)) * dt;
        phi[i + q] = b[i + q] + h * up;
      }
    }
    i += len;
  }
  return {phi, b};
}

}  // namespace support
