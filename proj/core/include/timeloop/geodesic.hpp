#pragma once

#include <vector>

#include "timeloop/manifold.hpp"
#include "timeloop/ode.hpp"

namespace timeloop {

inline constexpr double kDefaultIntegratorTol = 1e-10;

/// Geodesic gamma on [0, T] with gamma(0) = initial.base, gamma'(0) = initial.comp.
class GeodesicSegment {
 public:
  GeodesicSegment(SpacetimeModel model, TangentVec initial, double T, double tol,
                  DenseTrajectory trajectory);

  const SpacetimeModel& model() const noexcept { return model_; }
  const TangentVec& initial() const noexcept { return initial_; }
  double T() const noexcept { return T_; }
  double tol() const noexcept { return tol_; }
  CausalTag character() const noexcept { return character_; }
  /// |gamma'(0)| * T.
  double length() const noexcept { return length_; }

  Vec point(double t) const;
  Vec velocity(double t) const;
  Vec end_point() const;
  Vec end_velocity() const;
  /// Parameters of the accepted integrator steps, 0 = first, T = last.
  const std::vector<double>& nodes() const noexcept { return trajectory_.nodes(); }
  const DenseTrajectory& trajectory() const noexcept { return trajectory_; }

  /// Largest |g(gamma', gamma') - g(v, v)| over the integrator nodes.
  double energy_drift() const;

 private:
  SpacetimeModel model_;
  TangentVec initial_;
  double T_;
  double tol_;
  DenseTrajectory trajectory_;
  CausalTag character_;
  double length_;
};

/// Solves x'' + Gamma(x)(x', x') = 0 with the embedded Dormand-Prince pair.
/// Throws IntegrationError (chart exit, underflow) and DomainError for a base
/// point outside the chart.
GeodesicSegment integrate_geodesic(const SpacetimeModel& model, const TangentVec& v, double T,
                                   double tol = kDefaultIntegratorTol);

/// gamma_v(1), not canonicalized.
Vec exp_map(const SpacetimeModel& model, const TangentVec& v, double tol = kDefaultIntegratorTol);

/// Gauss-Legendre quadrature of |gamma'| over the dense output.
double length(const GeodesicSegment& seg);

/// Samples at `count` uniformly spaced parameters in [0, T].
struct TrajectorySample {
  double t;
  Vec x;
  Vec v;
};
std::vector<TrajectorySample> sample_uniform(const GeodesicSegment& seg, int count);

/// Geodesic flow together with its linearization. The state is
/// (x, u, dx_1, du_1, ..., dx_m, du_m); each (dx_k, du_k) column solves the
/// variational (Jacobi) equation in chart components
///   dx' = du,  du' = -dGamma(u, u) dx - 2 Gamma(u, du).
struct FlowVariations {
  Vec x;   // position at T
  Vec u;   // velocity at T
  Mat dx;  // n x m
  Mat du;  // n x m
};

/// Integrates the flow with the initial variations `seeds` (2n x m, rows
/// ordered dx then du) up to T. Passing `trajectory` keeps the dense output.
FlowVariations flow_variations(const SpacetimeModel& model, const TangentVec& v, double T,
                               const Mat& seeds, double tol = kDefaultIntegratorTol,
                               DenseTrajectory* trajectory = nullptr);

/// Unpacks a state of the augmented system.
FlowVariations unpack_flow_state(const Vec& y, int n, int m);

}  // namespace timeloop
