#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "whittaker/skorokhod.hpp"

using namespace whittaker;
using namespace whittaker::skorokhod;

namespace {

// O(M^2) evaluation straight from the defining formula.
SamplePath prefix_max_scan(const SamplePath& psi, const SamplePath& b, double start) {
  const double c = start - psi[0];
  SamplePath out(psi.grid());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j <= i; ++j) m = std::max(m, b[j] - psi[j] - c);
    out[i] = c + psi[i] + m;
  }
  return out;
}

}  // namespace

TEST(ReflectAbove, RunningMaxOfMonotoneBarrier) {
  const TimeGrid g(0.0, 1.0, 100);
  const auto r = reflect_above(SamplePath(g), SamplePath::from_function(g, [](double t) { return t - 0.5; }), 0.0);
  for (std::size_t i = 0; i < g.points(); ++i) EXPECT_NEAR(r.path[i], std::max(g.time(i) - 0.5, 0.0), 1e-15);
}

TEST(ReflectAbove, InactiveBarrier) {
  std::mt19937_64 rng(1);
  const TimeGrid g(0.0, 1.0, 100);
  SamplePath psi(g);
  std::uniform_real_distribution<double> u(-0.99, 0.99);
  for (std::size_t i = 0; i < g.points(); ++i) psi[i] = u(rng);
  psi[0] = 0.0;
  const auto r = reflect_above(psi, SamplePath(g, -1.0), 0.0);
  EXPECT_EQ(r.path, psi);
  for (std::size_t i = 0; i < g.points(); ++i) EXPECT_EQ(r.push[i], 0.0);
  const auto d = reflect_below(psi, SamplePath(g, 1.0), 0.0);
  EXPECT_EQ(d.path, psi);
}

TEST(ReflectAbove, MatchesQuadraticScan) {
  std::mt19937_64 rng(2);
  const TimeGrid g(0.0, 1.0, 128);
  for (int trial = 0; trial < 200; ++trial) {
    const auto psi = support::random_walk(rng, g, 1.0, 0.3);
    const auto b = support::random_walk(rng, g, 1.0, -0.2 + 0.01 * trial);
    const double start = 0.1;
    const auto r = reflect_above(psi, b, start);
    const auto o = prefix_max_scan(psi, b, start);
    for (std::size_t i = 1; i < g.points(); ++i) EXPECT_EQ(r.path[i], o[i]);
    EXPECT_NEAR(r.path[0], start + std::max(b[0] - start, 0.0), 1e-15);
  }
}

TEST(ReflectBelow, MirrorOfReflectAbove) {
  std::mt19937_64 rng(3);
  const TimeGrid g(0.0, 1.0, 128);
  for (int trial = 0; trial < 200; ++trial) {
    const auto psi = support::random_walk(rng, g, 1.0);
    const auto b = support::random_walk(rng, g, 1.0, 0.2);
    const auto below = reflect_below(psi, b, 0.05);
    const auto above = reflect_above(-psi, -b, -0.05);
    for (std::size_t i = 0; i < g.points(); ++i) {
      EXPECT_NEAR(below.path[i], -above.path[i], 1e-12);
      EXPECT_LE(below.path[i], b[i] + 1e-12);
    }
  }
  // Mirror of the monotone example.
  const auto r = reflect_below(SamplePath(g), SamplePath::from_function(g, [](double t) { return 0.5 - t; }), 0.0);
  for (std::size_t i = 0; i < g.points(); ++i) EXPECT_NEAR(r.path[i], std::min(0.5 - g.time(i), 0.0), 1e-15);
}

TEST(Reflection, Invariants) {
  std::mt19937_64 rng(4);
  const TimeGrid g(0.0, 1.0, 256);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto psi = support::random_walk(rng, g, 1.5);
    const auto b1 = support::random_walk(rng, g, 1.0, u(rng));
    auto b2 = b1;
    for (std::size_t i = 0; i < g.points(); ++i) b2[i] += 0.1 * u(rng);
    const double start = u(rng);
    const auto r1 = reflect_above(psi, b1, start);
    const auto r2 = reflect_above(psi, b2, start);
    EXPECT_DOUBLE_EQ(r1.push[0], std::max(b1[0] - start, 0.0));
    for (std::size_t i = 0; i < g.points(); ++i) {
      EXPECT_GE(r1.path[i], b1[i] - 1e-12);
      EXPECT_GE(r1.push[i], 0.0);
      if (i) {
        EXPECT_GE(r1.push[i], r1.push[i - 1]);
        EXPECT_NEAR(r1.path[i], r1.offset + psi[i] + r1.push[i], 1e-12);
      }
    }
    EXPECT_LE(sup_distance(r1.path, r2.path), sup_distance(b1, b2) + 1e-12);
  }
}

TEST(SmoothedReflection, FarBarrier) {
  const TimeGrid g(0.0, 1.0, 1000);
  const auto v = smoothed_reflection_term(SamplePath(g, -5.0), 10.0);
  EXPECT_NEAR(v.back(), 0.1 * std::log1p(10.0 * std::exp(-50.0)), 1e-30);
  EXPECT_EQ(limiting_reflection_term(SamplePath(g, -5.0)).back(), 0.0);
}

TEST(SmoothedReflection, LinearInput) {
  const TimeGrid g(0.0, 1.0, 1000);
  const auto h = SamplePath::from_function(g, [](double t) { return t; });
  const double gamma = 20.0;
  const auto v = smoothed_reflection_term(h, gamma);
  const auto vinf = limiting_reflection_term(h);
  EXPECT_EQ(vinf.back(), 1.0);
  // Closed form: (1/g) log(1 + e^{g t} - 1) = t, so V_gamma = t up to quadrature error.
  for (std::size_t i = 0; i < g.points(); ++i) {
    EXPECT_NEAR(v[i], g.time(i), 1e-4);
    EXPECT_LE(v[i], vinf[i] + std::log1p(gamma) / gamma);
  }
}

TEST(SmoothedReflection, UpperBoundOnRandomInputs) {
  std::mt19937_64 rng(8);
  const TimeGrid g(0.0, 1.0, 512);
  for (int trial = 0; trial < 100; ++trial) {
    const auto h = support::random_walk(rng, g, 1.0, -0.1);
    const auto vinf = limiting_reflection_term(h);
    for (double gamma : {8.0, 32.0, 128.0}) {
      const auto v = smoothed_reflection_term(h, gamma);
      for (std::size_t i = 0; i < g.points(); ++i) EXPECT_LE(v[i], vinf[i] + std::log1p(gamma) / gamma + 1e-12);
    }
  }
}
