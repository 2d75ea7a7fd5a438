#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "whittaker/error.hpp"

namespace whittaker {

// Position (n, k) in the triangular array, 1 <= k <= n.
struct TriIndex {
  int n = 1;
  int k = 1;

  friend bool operator==(const TriIndex&, const TriIndex&) = default;
};

inline constexpr std::size_t triangle_size(int levels) {
  return static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels + 1) / 2;
}

// Level-major flat offset: (1,1), (2,1), (2,2), (3,1), ...
inline constexpr std::size_t flat_index(TriIndex idx) {
  return triangle_size(idx.n - 1) + static_cast<std::size_t>(idx.k - 1);
}

inline TriIndex tri_index(std::size_t flat) {
  int n = 1;
  while (triangle_size(n) <= flat) ++n;
  return {n, static_cast<int>(flat - triangle_size(n - 1)) + 1};
}

inline bool valid_index(TriIndex idx, int levels) {
  return idx.n >= 1 && idx.n <= levels && idx.k >= 1 && idx.k <= idx.n;
}

// All indices of an N-level array in flat order.
inline std::vector<TriIndex> all_indices(int levels) {
  std::vector<TriIndex> out;
  out.reserve(triangle_size(levels));
  for (int n = 1; n <= levels; ++n)
    for (int k = 1; k <= n; ++k) out.push_back({n, k});
  return out;
}

// Upper barrier of (n,k) is (n-1,k-1); lower barrier is (n-1,k). Either may not exist.
inline bool has_upper_barrier(TriIndex idx) { return idx.n >= 2 && idx.k >= 2; }
inline bool has_lower_barrier(TriIndex idx) { return idx.n >= 2 && idx.k <= idx.n - 1; }
inline TriIndex upper_barrier(TriIndex idx) { return {idx.n - 1, idx.k - 1}; }
inline TriIndex lower_barrier(TriIndex idx) { return {idx.n - 1, idx.k}; }

// Uniform grid t_i = start + i * dt on [start, end], i = 0..steps.
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double start, double end, std::size_t steps) : start_(start), end_(end), steps_(steps) {
    if (!(start >= 0.0) || !(end > start) || !(end <= 1.0))
      throw ValidationError("time grid requires 0 <= start < end <= 1");
    if (steps == 0) throw ValidationError("time grid requires at least one step");
  }

  // Grid over [start, end] whose spacing is as close to `dt` as the interval allows.
  static TimeGrid with_spacing(double start, double end, double dt) {
    if (!(dt > 0.0)) throw ValidationError("time step must be positive");
    auto steps = static_cast<std::size_t>(std::llround((end - start) / dt));
    return TimeGrid(start, end, std::max<std::size_t>(steps, 1));
  }

  double start() const { return start_; }
  double end() const { return end_; }
  std::size_t steps() const { return steps_; }
  std::size_t points() const { return steps_ + 1; }
  double dt() const { return (end_ - start_) / static_cast<double>(steps_); }
  double length() const { return end_ - start_; }
  double time(std::size_t i) const {
    return i == steps_ ? end_ : start_ + static_cast<double>(i) * dt();
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

 private:
  double start_ = 0.0;
  double end_ = 1.0;
  std::size_t steps_ = 1;
};

// Values of one path on a TimeGrid.
class SamplePath {
 public:
  SamplePath() = default;
  explicit SamplePath(TimeGrid grid, double fill = 0.0) : grid_(grid), values_(grid.points(), fill) {}
  SamplePath(TimeGrid grid, std::vector<double> values) : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.points())
      throw ValidationError("path has " + std::to_string(values_.size()) + " values, grid needs " +
                            std::to_string(grid_.points()));
  }

  template <class F>
  static SamplePath from_function(TimeGrid grid, F&& f) {
    std::vector<double> v(grid.points());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(grid.time(i));
    return {grid, std::move(v)};
  }

  const TimeGrid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double front() const { return values_.front(); }
  double back() const { return values_.back(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  bool finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double x) { return std::isfinite(x); });
  }

  SamplePath operator-() const {
    SamplePath out = *this;
    for (double& x : out.values_) x = -x;
    return out;
  }

  friend bool operator==(const SamplePath&, const SamplePath&) = default;

 private:
  TimeGrid grid_;
  std::vector<double> values_;
};

inline void require_same_grid(const SamplePath& a, const SamplePath& b, const char* what) {
  if (!(a.grid() == b.grid())) throw ValidationError(std::string(what) + ": paths must share a grid");
}

inline double sup_distance(const SamplePath& a, const SamplePath& b) {
  require_same_grid(a, b, "sup_distance");
  double out = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) out = std::max(out, std::abs(a[i] - b[i]));
  return out;
}

// One real value per TriIndex.
class TriangularConfiguration {
 public:
  TriangularConfiguration() = default;
  explicit TriangularConfiguration(int levels, double fill = 0.0)
      : levels_(levels), entries_(triangle_size(levels), fill) {
    if (levels < 1) throw ValidationError("configuration needs at least one level");
  }
  TriangularConfiguration(int levels, std::vector<double> entries)
      : levels_(levels), entries_(std::move(entries)) {
    if (levels < 1) throw ValidationError("configuration needs at least one level");
    if (entries_.size() != triangle_size(levels))
      throw ValidationError("configuration with " + std::to_string(levels) + " levels needs " +
                            std::to_string(triangle_size(levels)) + " entries");
    for (double x : entries_)
      if (!std::isfinite(x)) throw ValidationError("configuration entries must be finite");
  }

  int levels() const { return levels_; }
  std::size_t size() const { return entries_.size(); }
  double operator[](TriIndex idx) const { return entries_[flat_index(idx)]; }
  double& operator[](TriIndex idx) { return entries_[flat_index(idx)]; }
  std::span<const double> entries() const { return entries_; }
  std::span<double> entries() { return entries_; }

  friend bool operator==(const TriangularConfiguration&, const TriangularConfiguration&) = default;

 private:
  int levels_ = 1;
  std::vector<double> entries_ = std::vector<double>(1, 0.0);
};

// One SamplePath per TriIndex on a shared grid.
class PathBundle {
 public:
  PathBundle() = default;
  PathBundle(int levels, TimeGrid grid) : levels_(levels), grid_(grid) {
    if (levels < 1) throw ValidationError("bundle needs at least one level");
    paths_.assign(triangle_size(levels), SamplePath(grid));
  }
  PathBundle(int levels, std::vector<SamplePath> paths) : levels_(levels) {
    if (levels < 1 || paths.size() != triangle_size(levels))
      throw ValidationError("bundle needs one path per triangular index");
    grid_ = paths.front().grid();
    for (const auto& p : paths)
      if (!(p.grid() == grid_)) throw ValidationError("bundle paths must share a grid");
    paths_ = std::move(paths);
  }

  // Every path constant at its configuration entry.
  static PathBundle constant(const TriangularConfiguration& config, TimeGrid grid) {
    PathBundle out(config.levels(), grid);
    for (std::size_t i = 0; i < out.paths_.size(); ++i)
      out.paths_[i] = SamplePath(grid, config.entries()[i]);
    return out;
  }

  int levels() const { return levels_; }
  const TimeGrid& grid() const { return grid_; }
  std::size_t size() const { return paths_.size(); }
  const SamplePath& operator[](TriIndex idx) const { return paths_[flat_index(idx)]; }
  SamplePath& operator[](TriIndex idx) { return paths_[flat_index(idx)]; }
  const SamplePath& path(std::size_t flat) const { return paths_[flat]; }
  SamplePath& path(std::size_t flat) { return paths_[flat]; }

  TriangularConfiguration slice(std::size_t i) const {
    std::vector<double> v(paths_.size());
    for (std::size_t p = 0; p < paths_.size(); ++p) v[p] = paths_[p][i];
    return {levels_, std::move(v)};
  }

  friend bool operator==(const PathBundle&, const PathBundle&) = default;

 private:
  int levels_ = 1;
  TimeGrid grid_;
  std::vector<SamplePath> paths_;
};

// Default stiffness cap exponent: drift terms e^{gamma x} are clamped at e^{gamma * 0.25}.
inline constexpr double kDefaultCapExponent = 0.25;

struct ModelConfig {
  int levels = 1;
  double gamma = 1.0;
  std::vector<double> drifts;  // a_n per level; empty means all zero
  TriangularConfiguration initial;
  double drift_cap = std::exp(kDefaultCapExponent);

  static ModelConfig make(TriangularConfiguration initial, double gamma,
                          double cap_exponent = kDefaultCapExponent) {
    ModelConfig c;
    c.levels = initial.levels();
    c.gamma = gamma;
    c.initial = std::move(initial);
    c.drift_cap = std::exp(gamma * cap_exponent);
    return c;
  }

  double drift(int level) const {
    return drifts.empty() ? 0.0 : drifts[static_cast<std::size_t>(level - 1)];
  }

  void check() const {
    if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma must be positive");
    if (!(drift_cap > 0.0)) throw ValidationError("drift cap must be positive");
    if (initial.levels() != levels) throw ValidationError("initial configuration level mismatch");
    if (!drifts.empty() && drifts.size() != static_cast<std::size_t>(levels))
      throw ValidationError("drifts need one entry per level");
  }
};

// Interlacing margins f and g = 2f; level n uses f_n = 4^{n-1} f and g_n = 4^{n-1} g.
struct InterlaceBounds {
  double f = 0.0;
  double g = 0.0;

  static InterlaceBounds from_f(double f) {
    if (!(f > 0.0)) throw ValidationError("interlacing margin must be positive");
    return {f, 2.0 * f};
  }
  static InterlaceBounds for_gamma(double gamma) { return from_f(1.0 / std::sqrt(gamma)); }

  double f_level(int n) const { return std::pow(4.0, n - 1) * f; }
  double g_level(int n) const { return std::pow(4.0, n - 1) * g; }
};

// ---------------------------------------------------------------------------
// Initial-condition check

// One violated particle (n,k) of level n < N with both of its signed defects
// below = T_{n+1,k} - T_{n,k} and above = T_{n,k} - T_{n+1,k+1}.
struct InterlaceViolation {
  TriIndex index;
  double below_defect = 0.0;
  double above_defect = 0.0;
};

struct InitialReport {
  std::vector<InterlaceViolation> violations;
  bool ok() const { return violations.empty(); }
};

inline InitialReport validate_initial(const TriangularConfiguration& initial) {
  InitialReport report;
  for (int n = 1; n < initial.levels(); ++n) {
    for (int k = 1; k <= n; ++k) {
      const double below = initial[{n + 1, k}] - initial[{n, k}];
      const double above = initial[{n, k}] - initial[{n + 1, k + 1}];
      if (below < 0.0 || above < 0.0) report.violations.push_back({{n, k}, below, above});
    }
  }
  return report;
}

inline InitialReport validate_initial(const ModelConfig& config) {
  config.check();
  return validate_initial(config.initial);
}

// ---------------------------------------------------------------------------
// Interlacing events along a bundle

enum class EventFamily { A, B, C };

// min over the grid of one relation's left-hand side, e.g. T_{n+1,k} - T_{n,k}.
struct RelationDefect {
  EventFamily family = EventFamily::A;
  int event_level = 1;  // the n of A_n / B_n / C_n
  TriIndex larger;      // particle expected on top
  TriIndex smaller;
  double worst = 0.0;
  double margin = 0.0;
  bool holds() const { return worst >= -margin; }
};

struct InterlacingReport {
  std::vector<RelationDefect> relations;
  // Indexed by n - 1, n = 1..N-1. B_n for n = N-1 has no relations and holds vacuously.
  std::vector<bool> a_holds;
  std::vector<bool> b_holds;
  std::vector<bool> c_holds;

  bool all_a() const { return std::all_of(a_holds.begin(), a_holds.end(), [](bool b) { return b; }); }
  bool all_b() const { return std::all_of(b_holds.begin(), b_holds.end(), [](bool b) { return b; }); }
  bool all_c() const { return std::all_of(c_holds.begin(), c_holds.end(), [](bool b) { return b; }); }
};

namespace detail {

inline double worst_difference(const SamplePath& larger, const SamplePath& smaller) {
  double w = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < larger.size(); ++i) w = std::min(w, larger[i] - smaller[i]);
  return w;
}

}  // namespace detail

// A_n: level n vs n+1 with margin f_n. B_n: level n+1 vs n+2 with margin g_n.
// C_n: neighbours on level n+1 with margin g_n. `f` is the base margin f_1.
inline InterlacingReport interlacing_defect(const PathBundle& bundle, double f) {
  const auto bounds = InterlaceBounds::from_f(f);
  const int levels = bundle.levels();
  InterlacingReport report;
  const auto events = static_cast<std::size_t>(std::max(levels - 1, 0));
  report.a_holds.assign(events, true);
  report.b_holds.assign(events, true);
  report.c_holds.assign(events, true);

  auto record = [&](EventFamily fam, int n, TriIndex hi, TriIndex lo, double margin) {
    RelationDefect d{fam, n, hi, lo, detail::worst_difference(bundle[hi], bundle[lo]), margin};
    auto& flags = fam == EventFamily::A ? report.a_holds
                  : fam == EventFamily::B ? report.b_holds
                                          : report.c_holds;
    if (!d.holds()) flags[static_cast<std::size_t>(n - 1)] = false;
    report.relations.push_back(d);
  };

  for (int n = 1; n < levels; ++n) {
    const double fn = bounds.f_level(n);
    const double gn = bounds.g_level(n);
    for (int k = 1; k <= n; ++k) {
      record(EventFamily::A, n, {n + 1, k}, {n, k}, fn);
      record(EventFamily::A, n, {n, k}, {n + 1, k + 1}, fn);
    }
    if (n + 2 <= levels) {
      for (int k = 1; k <= n + 1; ++k) {
        record(EventFamily::B, n, {n + 2, k}, {n + 1, k}, gn);
        record(EventFamily::B, n, {n + 1, k}, {n + 2, k + 1}, gn);
      }
    }
    for (int k = 1; k <= n; ++k) record(EventFamily::C, n, {n + 1, k}, {n + 1, k + 1}, gn);
  }
  return report;
}

}  // namespace whittaker
