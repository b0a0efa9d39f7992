#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "timeloop/timeloop.hpp"

using namespace timeloop;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

Mat minkowski_metric() { return Mat(Eigen::Vector2d(-1, 1).asDiagonal()); }

DeckElement translation(const std::string& label, double t, double x) {
  return {label, Mat::Identity(2, 2), v2(t, x)};
}

DeckElement boost(double rapidity) {
  Mat A(2, 2);
  A << std::cosh(rapidity), std::sinh(rapidity), std::sinh(rapidity), std::cosh(rapidity);
  return {"boost", A, Vec::Zero(2)};
}

SpacetimeModel tilted_quotient() { return flat_quotient(minkowski_metric(), {translation("a", 2, 1)}); }

}  // namespace

TEST_CASE("flat Lorentzian distance") {
  CHECK(lorentz_distance_flat(v2(0, 0), v2(1, 0)) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(lorentz_distance_flat(v2(0, 0), v2(2, 1)) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  CHECK(lorentz_distance_flat(v2(0, 0), v2(0, 1)) == 0.0);
  CHECK(lorentz_distance_flat(v2(0, 0), v2(-1, 0)) == 0.0);
  CHECK(lorentz_distance_flat(v2(0, 0), v2(1, 1)) == 0.0);
  CHECK(lorentz_distance_flat(cylinder(), v2(0.2, 0.1), v2(1.2, 0.1)) == doctest::Approx(1.0));
  CHECK_THROWS_AS(lorentz_distance_flat(warped_cylinder(), v2(0, 0), v2(1, 0)), ConfigError);
  CHECK_THROWS_AS(lorentz_distance_flat(ads2(), v2(0, 0), v2(1, 0)), ConfigError);
}

TEST_CASE("flat distance agrees with the oracle on random pairs") {
  Rng rng(61);
  for (int i = 0; i < 50; ++i) {
    const Vec a = rng.uniform_box(2, 3.0), b = rng.uniform_box(2, 3.0);
    CHECK(std::abs(lorentz_distance_flat(a, b) - oracle::minkowski_distance(a, b)) < 1e-14);
  }
}

TEST_CASE("future timelike isometries among translations") {
  const SpacetimeModel m = minkowski(2);
  CHECK(is_future_timelike_isometry(m, translation("f", 1, 0)));
  CHECK_FALSE(is_future_timelike_isometry(m, translation("s", 0, 1)));
  CHECK_FALSE(is_future_timelike_isometry(m, translation("p", -1, 0)));
  CHECK(is_future_timelike_isometry(m, DeckElement::identity(2)));
  // A boost fixes the origin but moves x-axis points spacelike.
  CHECK_FALSE(is_future_timelike_isometry(m, boost(0.5)));
}

TEST_CASE("non-isometries are rejected") {
  DeckElement scale{"scale", 2.0 * Mat::Identity(2, 2), Vec::Zero(2)};
  CHECK_THROWS_AS(is_clifford_translation(minkowski(2), scale), ConfigError);
  CHECK_THROWS_AS(is_clifford_translation(warped_cylinder(), translation("T", 1, 0)), ConfigError);
}

TEST_CASE("the unit time translation is a Clifford translation") {
  const IsometryReport r = is_clifford_translation(minkowski(2), translation("T", 1, 0), {100, 10.0, 7});
  CHECK(r.clifford);
  CHECK(r.future_timelike);
  CHECK(r.distance_spread < 1e-12);
  REQUIRE(r.distance_samples.size() == 100);
  for (const DistanceSample& s : r.distance_samples) CHECK(s.distance == doctest::Approx(1.0));
}

TEST_CASE("a boost is not a Clifford translation") {
  const IsometryReport r = is_clifford_translation(minkowski(2), boost(0.5), {100, 10.0, 7});
  CHECK_FALSE(r.clifford);
  CHECK_FALSE(r.future_timelike);
  for (const DistanceSample& s : r.distance_samples)
    CHECK(std::abs(s.distance - oracle::minkowski_distance(s.point, boost(0.5).apply(s.point))) < 1e-12);
  // Same sample size and box, independent point stream.
  const double ref = oracle::boost_distance_spread(0.5, 100, 10.0, 7);
  CHECK(ref > 1.0);
  CHECK(r.distance_spread > 1.0);
}

TEST_CASE("the identity is trivially Clifford") {
  const IsometryReport r = is_clifford_translation(minkowski(2), DeckElement::identity(2));
  CHECK(r.clifford);
  CHECK(r.distance_spread == 0.0);
}

TEST_CASE("closed geodesics from Clifford translations") {
  SUBCASE("cylinder generator") {
    const LoopCandidate loop = closed_geodesic_from_clifford(cylinder(), "T", v2(0, 0.3));
    CHECK((loop.v.comp - v2(1, 0)).norm() < 1e-12);
    CHECK(loop.length == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(is_closed_geodesic(cylinder(), loop));
    CHECK(loop.deck == "T");
  }
  SUBCASE("tilted translation") {
    const LoopCandidate loop = closed_geodesic_from_clifford(tilted_quotient(), "a", v2(0, 0));
    CHECK(loop.length == doctest::Approx(std::sqrt(3.0)).epsilon(1e-14));
    CHECK(is_closed_geodesic(tilted_quotient(), loop));
  }
  SUBCASE("doubled generator") {
    const LoopCandidate loop = closed_geodesic_from_clifford(cylinder(), "T^2", v2(0, 0));
    CHECK(loop.length == doctest::Approx(2.0).epsilon(1e-14));
  }
  SUBCASE("preconditions") {
    CHECK_THROWS_AS(closed_geodesic_from_clifford(cylinder(), "identity", v2(0, 0)), PreconditionError);
    CHECK_THROWS_AS(closed_geodesic_from_clifford(cylinder(), "T^-1", v2(0, 0)), PreconditionError);
    const SpacetimeModel spacelike = flat_quotient(minkowski_metric(), {translation("s", 0, 1)});
    CHECK_THROWS_AS(closed_geodesic_from_clifford(spacelike, "s", v2(0, 0)), PreconditionError);
  }
}

TEST_CASE("find_clifford_class picks a future timelike generator") {
  CHECK(find_clifford_class(cylinder()).label == "T");
  CHECK(find_clifford_class(tilted_quotient()).label == "a");
  const SpacetimeModel spacelike = flat_quotient(minkowski_metric(), {translation("s", 0, 1)});
  CHECK_THROWS_AS(find_clifford_class(spacelike), ConfigError);
}

TEST_CASE("Clifford loops are locally maximizing") {
  Rng rng(62);
  for (const auto& [m, label] : {std::pair{cylinder(), std::string("T")}, {tilted_quotient(), std::string("a")}}) {
    CAPTURE(label);
    const LoopCandidate loop = closed_geodesic_from_clifford(m, label, v2(0.1, 0.2));
    for (int i = 0; i < 10; ++i) {
      const TangentVec seed{loop.base() + rng.uniform_ball(2, 1e-3), loop.v.comp + rng.uniform_ball(2, 1e-3)};
      const LoopCandidate nearby = find_loop(m, seed, label);
      CHECK(nearby.converged);
      CHECK(nearby.length <= loop.length + 1e-9);
    }
  }
}

// ---- properties ----------------------------------------------------------------

TEST_CASE("Clifford loop lengths do not depend on the base point") {
  for (const auto& [m, label] : {std::pair{cylinder(), std::string("T")}, {tilted_quotient(), std::string("a")}}) {
    Rng rng(63);
    double lo = 1e300, hi = -1e300;
    for (int i = 0; i < 20; ++i) {
      const LoopCandidate loop = closed_geodesic_from_clifford(m, label, rng.uniform_box(2, 5.0));
      CHECK(m.classify(loop.v).character == Causal::timelike);
      CHECK(is_closed_geodesic(m, loop));
      lo = std::min(lo, loop.length);
      hi = std::max(hi, loop.length);
    }
    CHECK(hi - lo < 1e-12);
  }
}

TEST_CASE("the Clifford verdict is stable under conjugation by translations") {
  Rng rng(64);
  const SpacetimeModel m = minkowski(2);
  for (const DeckElement& d : {translation("T", 1, 0), translation("a", 2, 1), translation("s", 0, 1),
                               translation("p", -1, 0.3)}) {
    const IsometryReport base = is_clifford_translation(m, d);
    for (int i = 0; i < 5; ++i) {
      const Vec c = rng.uniform_box(2, 4.0);
      // tau_c o rho o tau_{-c} = x -> A x + b + (I - A) c.
      const DeckElement conj{d.label, d.A, d.b + (Mat::Identity(2, 2) - d.A) * c};
      const IsometryReport r = is_clifford_translation(m, conj);
      CHECK(r.clifford == base.clifford);
      CHECK(r.future_timelike == base.future_timelike);
    }
  }
}

TEST_CASE("a closed timelike geodesic passes through every sampled point") {
  Rng rng(65);
  std::vector<Vec> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(rng.uniform_box(2, 3.0));
  for (const SpacetimeModel& m : {cylinder(), tilted_quotient()}) {
    const std::vector<LoopCandidate> loops = closed_geodesics_through(m, pts);
    REQUIRE(loops.size() == pts.size());
    for (std::size_t i = 0; i < loops.size(); ++i) {
      CHECK((loops[i].base() - pts[i]).norm() < 1e-14);
      CHECK(is_closed_geodesic(m, loops[i]));
    }
  }
}
