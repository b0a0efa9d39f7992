#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "timeloop/timeloop.hpp"

using namespace timeloop;
using std::numbers::pi;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

}  // namespace

TEST_CASE("Minkowski geodesics are straight lines") {
  const GeodesicSegment seg = integrate_geodesic(minkowski(2), {v2(0, 0), v2(1, 0)}, 1.0);
  CHECK((seg.end_point() - v2(1, 0)).norm() < 1e-12);
  CHECK((seg.point(0.5) - v2(0.5, 0)).norm() < 1e-12);
  CHECK((exp_map(minkowski(2), {v2(0, 0), v2(3, 1)}) - v2(3, 1)).norm() < 1e-12);
}

TEST_CASE("the t-line of the warped cylinder is a geodesic") {
  const GeodesicSegment seg = integrate_geodesic(warped_cylinder(), {v2(0, 0), v2(1, 0)}, 1.0);
  const oracle::State ref = oracle::rk4(oracle::warped_cosh_rhs, {0, 0, 1, 0}, 1.0, 4000);
  CHECK((seg.end_point() - v2(ref[0], ref[1])).norm() < 1e-10);
  CHECK((seg.end_point() - v2(1, 0)).norm() < 1e-10);
}

TEST_CASE("warped cylinder geodesics agree with a fixed-step reference integrator") {
  for (const auto& [x, vt, vx] : {std::tuple{0.4, 1.05, 0.1}, {-0.3, 1.5, -0.7}, {0.9, 0.3, 1.2}}) {
    const GeodesicSegment seg = integrate_geodesic(warped_cylinder(), {v2(0, x), v2(vt, vx)}, 1.0, 1e-12);
    // The RK4 step count is ten times the adaptive one at the very least.
    const int steps = std::max<int>(2000, 10 * static_cast<int>(seg.nodes().size()));
    const oracle::State ref = oracle::rk4(oracle::warped_cosh_rhs, {0, x, vt, vx}, 1.0, steps);
    CHECK((seg.end_point() - v2(ref[0], ref[1])).norm() < 1e-9);
    CHECK((seg.end_velocity() - v2(ref[2], ref[3])).norm() < 1e-9);
  }
}

TEST_CASE("the AdS2 circle closes after 2 pi") {
  const SpacetimeModel m = ads2();
  const GeodesicSegment seg = integrate_geodesic(m, {v2(0, 0), v2(1, 0)}, 2 * pi);
  const Vec end = seg.end_point();
  CHECK(std::abs(end[0] - 2 * pi) < 1e-6);
  CHECK(std::abs(end[1]) < 1e-6);
  CHECK(length(seg) == doctest::Approx(2 * pi).epsilon(1e-9));
  CHECK((exp_map(m, {v2(0, 0), v2(2 * pi, 0)}) - v2(2 * pi, 0)).norm() < 1e-6);
}

TEST_CASE("AdS2 exp agrees with the hyperboloid closed form") {
  const SpacetimeModel m = ads2();
  for (const auto& [th, s, a, b] : {std::tuple{0.0, 0.0, 1.0, 0.3}, {1.0, 0.5, 0.8, -0.4}, {-2.0, -0.7, 2.1, 0.9}}) {
    const TangentVec v{v2(th, s), v2(a, b)};
    REQUIRE(m.classify(v).character == Causal::timelike);
    const Eigen::Vector2d ref = oracle::ads_exp({th, s}, {a, b});
    CHECK((exp_map(m, v, 1e-12) - Vec(ref)).norm() < 1e-8);
  }
}

TEST_CASE("cylinder exp of the generator loop canonicalizes to the base point") {
  const SpacetimeModel m = cylinder();
  const Vec e = exp_map(m, {v2(0, 0), v2(1, 0)});
  CHECK((e - v2(1, 0)).norm() < 1e-12);
  CHECK(m.canonicalize(e).norm() < 1e-12);
}

TEST_CASE("length is |v| T and vanishes on null geodesics") {
  CHECK(length(integrate_geodesic(cylinder(), {v2(0, 0), v2(1, 0)}, 1.0)) == doctest::Approx(1.0));
  const GeodesicSegment null = integrate_geodesic(minkowski(2), {v2(0, 0), v2(1, 1)}, 5.0);
  CHECK(length(null) == 0.0);
  CHECK(null.character().character == Causal::null);
}

TEST_CASE("sample_uniform returns the requested grid") {
  const GeodesicSegment seg = integrate_geodesic(minkowski(2), {v2(0, 0), v2(2, 1)}, 3.0);
  const auto samples = sample_uniform(seg, 7);
  REQUIRE(samples.size() == 7);
  CHECK(samples.front().t == 0.0);
  CHECK(samples.back().t == 3.0);
  CHECK((samples[3].x - v2(3, 1.5)).norm() < 1e-12);
}

TEST_CASE("integration errors carry the last valid parameter") {
  // A steep spacelike geodesic leaves the AdS2 overflow guard.
  try {
    integrate_geodesic(ads2(), {v2(0, 0), v2(0, 1)}, 40.0);
    FAIL("expected an IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.last_valid() > 25.0);
    CHECK(e.last_valid() < 31.0);
    CHECK(e.chart_exit());
  }
}

TEST_CASE("tolerance outside the documented range is rejected") {
  CHECK_THROWS_AS(integrate_geodesic(minkowski(2), {v2(0, 0), v2(1, 0)}, 1.0, 1e-16), ConfigError);
  CHECK_THROWS_AS(integrate_geodesic(minkowski(2), {v2(0, 0), v2(1, 0)}, 1.0, 1e-2), ConfigError);
  CHECK_THROWS_AS(integrate_geodesic(minkowski(2), {v2(0, 0), v2(1, 0)}, -1.0), ConfigError);
}

// ---- properties ----------------------------------------------------------------

namespace {

std::vector<SpacetimeModel> curved() {
  return {warped_cylinder(), warped_cylinder(WarpProfile::one_plus_eps_x2, 0.3), ads2(),
          warped_cylinder(WarpProfile::cosh, 0.0, 1.0, false)};
}

TangentVec random_timelike(const SpacetimeModel& m, Rng& rng) {
  for (;;) {
    const Vec p = rng.uniform_box(m.dim(), 0.8);
    Vec c = rng.uniform_box(m.dim(), 1.5);
    c[0] = std::abs(c[0]) + 0.1;
    const TangentVec v{p, c};
    if (m.classify(v).character == Causal::timelike) return v;
  }
}

}  // namespace

TEST_CASE("energy is conserved along timelike geodesics") {
  const double tol = 1e-10;
  for (const SpacetimeModel& m : curved()) {
    CAPTURE(m.name());
    Rng rng(21);
    for (int i = 0; i < 20; ++i) {
      const TangentVec v = random_timelike(m, rng);
      const GeodesicSegment seg = integrate_geodesic(m, v, 2.0, tol);
      CHECK(seg.energy_drift() <= 10 * tol);
      const double e0 = m.inner(v.base, v.comp, v.comp);
      for (double t : seg.nodes())
        CHECK(std::abs(m.inner(seg.point(t), seg.velocity(t), seg.velocity(t)) - e0) <= 10 * tol * std::abs(e0));
      CHECK(seg.character() == m.classify(v));
      CHECK(std::abs(seg.length() - m.norm(v) * 2.0) <= 10 * tol * std::max(1.0, seg.length()));
      CHECK(std::abs(length(seg) - seg.length()) <= 10 * tol * std::max(1.0, seg.length()));
    }
  }
}

TEST_CASE("affine rescaling traverses the same geodesic") {
  const double tol = 1e-10;
  for (const SpacetimeModel& m : curved()) {
    Rng rng(22);
    for (int i = 0; i < 10; ++i) {
      const TangentVec v = random_timelike(m, rng);
      for (double c : {0.5, 2.0, 3.0}) {
        const Vec a = integrate_geodesic(m, v, 1.5, tol).end_point();
        const Vec b = integrate_geodesic(m, v.scaled(c), 1.5 / c, tol).end_point();
        CHECK((a - b).norm() <= 10 * tol * std::max(1.0, a.norm()));
      }
    }
  }
}

TEST_CASE("reversing the end velocity returns to the start") {
  const double tol = 1e-10;
  for (const SpacetimeModel& m : curved()) {
    Rng rng(23);
    for (int i = 0; i < 10; ++i) {
      const TangentVec v = random_timelike(m, rng);
      const GeodesicSegment fwd = integrate_geodesic(m, v, 1.5, tol);
      const Vec back = integrate_geodesic(m, {fwd.end_point(), -fwd.end_velocity()}, 1.5, tol).end_point();
      CHECK((back - v.base).norm() <= 10 * tol * std::max(1.0, v.base.norm()));
    }
  }
}

TEST_CASE("flat exp is translation") {
  Rng rng(24);
  for (const SpacetimeModel& m : {minkowski(2), minkowski(3), cylinder()}) {
    for (int i = 0; i < 20; ++i) {
      const TangentVec v{rng.uniform_box(m.dim(), 3.0), rng.uniform_box(m.dim(), 3.0)};
      CHECK((exp_map(m, v) - (v.base + v.comp)).norm() < 1e-12);
    }
  }
}

TEST_CASE("repeated integrations are bitwise identical") {
  const TangentVec v{v2(0.1, 0.4), v2(1.05, 0.1)};
  const Vec a = exp_map(warped_cylinder(), v);
  const Vec b = exp_map(warped_cylinder(), v);
  CHECK(a[0] == b[0]);
  CHECK(a[1] == b[1]);
}
