#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timeloop/loop.hpp"
#include "timeloop/manifold.hpp"

namespace timeloop {

/// Lorentzian distance in a flat chart: sqrt(-g(b - a, b - a)) when b - a is
/// future-directed causal, 0 otherwise. Throws ConfigError for curved models.
double lorentz_distance_flat(const SpacetimeModel& model, const Vec& a, const Vec& b);
/// Same on Minkowski space of dimension a.size().
double lorentz_distance_flat(const Vec& a, const Vec& b);

struct CoveringSampling {
  int samples = 100;
  double radius = 10.0;  // points are drawn from [-radius, radius]^n
  std::uint64_t seed = 7;
};

/// rho(p) = p or rho(p) future timelike from p. Decided exactly for
/// translations, by sampling otherwise.
bool is_future_timelike_isometry(const SpacetimeModel& model, const DeckElement& deck,
                                 const CoveringSampling& sampling = {});

struct DistanceSample {
  Vec point;
  double distance;
};

struct IsometryReport {
  DeckElement deck;
  bool future_timelike = false;
  bool clifford = false;
  std::vector<DistanceSample> distance_samples;
  double distance_spread = 0.0;
};

/// Samples d(p, rho(p)); clifford when the spread is below tol.
IsometryReport is_clifford_translation(const SpacetimeModel& model, const DeckElement& deck,
                                       const CoveringSampling& sampling = {}, double tol = 1e-12);

/// Straight segment p -> rho(p) in the flat covering, read as a loop in the
/// quotient class `deck`. Throws PreconditionError unless rho is a
/// non-trivial future timelike Clifford translation.
LoopCandidate closed_geodesic_from_clifford(const SpacetimeModel& model, const std::string& deck,
                                            const Vec& p, const CoveringSampling& sampling = {});

/// First loop class of the model whose deck element is a non-trivial future
/// timelike Clifford translation. Throws ConfigError when there is none.
DeckElement find_clifford_class(const SpacetimeModel& model, const CoveringSampling& sampling = {});

/// A closed timelike geodesic through each point, all in the class returned
/// by find_clifford_class.
std::vector<LoopCandidate> closed_geodesics_through(const SpacetimeModel& model,
                                                    const std::vector<Vec>& points,
                                                    const CoveringSampling& sampling = {});

}  // namespace timeloop
