#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "timeloop/linalg.hpp"

namespace timeloop {

/// Seeded generator whose draws do not depend on the standard library's
/// distribution implementations, so reports are reproducible across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec uniform_box(int n, double radius) {
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = uniform(-radius, radius);
    return v;
  }

  /// Uniform point of the chart-Euclidean ball of the given radius.
  Vec uniform_ball(int n, double radius) {
    Vec d(n);
    for (int i = 0; i < n; ++i) d[i] = normal();
    d.normalize();
    return radius * std::pow(uniform(), 1.0 / n) * d;
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace timeloop
