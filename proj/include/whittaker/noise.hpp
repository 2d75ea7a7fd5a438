#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "whittaker/model.hpp"

namespace whittaker {

// Addresses one independent noise realisation. Every Gaussian increment is a
// pure function of (seed, replicate, particle, step).
struct Seed {
  std::uint64_t seed = 0;
  std::uint64_t replicate = 0;

  std::string header() const {
    return "seed=" + std::to_string(seed) + " replicate=" + std::to_string(replicate);
  }
  friend bool operator==(const Seed&, const Seed&) = default;
};

namespace noise {

// Philox4x32-10 counter-based generator.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter generate(Counter ctr, Key key) {
    for (int r = 0; r < 10; ++r) {
      ctr = round(ctr, key);
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;

  static Counter round(const Counter& c, const Key& k) {
    const std::uint64_t p0 = std::uint64_t{kM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * c[2];
    return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
            static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
};

// Uniform on the open interval (0, 1) from 64 random bits.
inline double open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (std::uint64_t{hi} << 32) | lo;
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

// Two standard normals for steps 2*pair and 2*pair + 1 of one particle.
inline std::array<double, 2> normal_pair(const Seed& s, std::uint32_t particle, std::uint64_t pair) {
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(pair), particle,
                                static_cast<std::uint32_t>(s.replicate),
                                static_cast<std::uint32_t>(s.replicate >> 32) ^
                                    (static_cast<std::uint32_t>(pair >> 32) << 16)};
  const Philox4x32::Key key{static_cast<std::uint32_t>(s.seed), static_cast<std::uint32_t>(s.seed >> 32)};
  const auto x = Philox4x32::generate(ctr, key);
  const double u1 = open_unit(x[0], x[1]);
  const double u2 = open_unit(x[2], x[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return {r * std::cos(angle), r * std::sin(angle)};
}

inline double standard_normal(const Seed& s, std::size_t particle, std::size_t step) {
  return normal_pair(s, static_cast<std::uint32_t>(particle), step / 2)[step % 2];
}

// Sequential reader of per-step increments for all particles. Produces exactly
// the values of standard_normal(...) * sqrt(dt), reusing the second draw of
// each pair when steps are visited in order.
class IncrementStream {
 public:
  IncrementStream(Seed seed, std::size_t particles, double dt)
      : seed_(seed), sqrt_dt_(std::sqrt(dt)), cache_(particles) {}

  void fill(std::size_t step, std::span<double> out) {
    const std::uint64_t pair = step / 2;
    if (step % 2 == 1 && cached_pair_ == pair) {
      for (std::size_t p = 0; p < out.size(); ++p) out[p] = cache_[p];
      return;
    }
    for (std::size_t p = 0; p < out.size(); ++p) {
      const auto z = normal_pair(seed_, static_cast<std::uint32_t>(p), pair);
      out[p] = z[step % 2] * sqrt_dt_;
      cache_[p] = z[1] * sqrt_dt_;
    }
    cached_pair_ = step % 2 == 0 ? pair : kNone;
  }

 private:
  static constexpr std::uint64_t kNone = ~std::uint64_t{0};
  Seed seed_;
  double sqrt_dt_;
  std::vector<double> cache_;
  std::uint64_t cached_pair_ = kNone;
};

}  // namespace noise

// Brownian increments, each Normal(0, dt), for every particle of an N-level array.
class NoiseBundle {
 public:
  NoiseBundle() = default;
  NoiseBundle(TimeGrid grid, int levels)
      : grid_(grid), levels_(levels), increments_(triangle_size(levels), std::vector<double>(grid.steps(), 0.0)) {}

  const TimeGrid& grid() const { return grid_; }
  int levels() const { return levels_; }
  std::size_t particles() const { return increments_.size(); }
  std::span<const double> increments(std::size_t particle) const { return increments_[particle]; }
  std::span<double> increments(std::size_t particle) { return increments_[particle]; }
  double increment(std::size_t particle, std::size_t step) const { return increments_[particle][step]; }

  // W on the grid with W(start) = 0.
  SamplePath cumulative(std::size_t particle) const {
    SamplePath w(grid_);
    double acc = 0.0;
    for (std::size_t i = 0; i < grid_.steps(); ++i) {
      acc += increments_[particle][i];
      w[i + 1] = acc;
    }
    return w;
  }

  friend bool operator==(const NoiseBundle&, const NoiseBundle&) = default;

 private:
  TimeGrid grid_;
  int levels_ = 1;
  std::vector<std::vector<double>> increments_;
};

inline NoiseBundle sample_noise(const Seed& seed, const TimeGrid& grid, int levels) {
  NoiseBundle out(grid, levels);
  noise::IncrementStream stream(seed, out.particles(), grid.dt());
  std::vector<double> step(out.particles());
  for (std::size_t i = 0; i < grid.steps(); ++i) {
    stream.fill(i, step);
    for (std::size_t p = 0; p < step.size(); ++p) out.increments(p)[i] = step[p];
  }
  return out;
}

// A bundle of zero increments, for noise-free runs.
inline NoiseBundle zero_noise(const TimeGrid& grid, int levels) { return NoiseBundle(grid, levels); }

}  // namespace whittaker
