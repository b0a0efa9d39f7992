#pragma once

#include <vector>

#include "timeloop/geodesic.hpp"
#include "timeloop/loop.hpp"

namespace timeloop {

/// Linear map (J(0), J'(0)) -> (J(t), J'(t)) along a geodesic, where J' is
/// the covariant derivative. Columns of the variational flow are converted
/// to covariant form at both ends.
class JacobiPropagator {
 public:
  JacobiPropagator(const GeodesicSegment& seg, double tol = kDefaultIntegratorTol);

  const GeodesicSegment& segment() const noexcept { return seg_; }
  /// 2n x 2n transition matrix at parameter t in [0, T].
  Mat transition(double t) const;
  /// Applies transition(t) to a single initial condition.
  std::pair<Vec, Vec> propagate(double t, const Vec& J0, const Vec& J0dot) const;

 private:
  GeodesicSegment seg_;
  DenseTrajectory flow_;  // geodesic plus 2n chart-form variations
  Mat to_chart0_;         // covariant initial data -> chart initial data
};

struct JacobiSample {
  double t;
  Vec J;
  Vec Jdot;  // covariant derivative
};

/// Jacobi field with the given initial data, at `count` uniformly spaced
/// parameters of the segment.
std::vector<JacobiSample> jacobi_propagate(const SpacetimeModel& model, const GeodesicSegment& seg,
                                           const Vec& J0, const Vec& J0dot, int count = 101);

/// (d exp_p)_v (w) = J(1) for J(0) = 0, J'(0) = w.
Vec dexp(const SpacetimeModel& model, const TangentVec& v, const Vec& w,
         double tol = kDefaultIntegratorTol);
/// Matrix of (d exp_p)_v in chart components.
Mat dexp_matrix(const SpacetimeModel& model, const TangentVec& v,
                double tol = kDefaultIntegratorTol);

struct ConjugateOptions {
  double tol = 1e-10;      // bisection tolerance on the parameter
  double dip_tol = 1e-6;   // |D| below this at a local minimum counts as a zero
  int samples_per_step = 8;
  int min_samples = 200;
  double integrator_tol = kDefaultIntegratorTol;
};

/// D(t) = det Y(t) / t^n, where Y(t) is the matrix of Jacobi fields with
/// J(0) = 0, J'(0) = e_i. D is continuous with D(0) = 1.
struct DeterminantProfile {
  std::vector<double> t;
  std::vector<double> value;
};

DeterminantProfile determinant_profile(const SpacetimeModel& model, const GeodesicSegment& seg,
                                       const ConjugateOptions& opts = {});

/// Parameters in (0, T] conjugate to the start along seg, ascending.
std::vector<double> conjugate_points(const SpacetimeModel& model, const GeodesicSegment& seg,
                                     const ConjugateOptions& opts = {});

struct SelfConjugacy {
  bool self_conjugate = false;
  double det = 0.0;         // det (d exp_p)_v in chart components
  double normalized = 0.0;  // |det M| / sigma_max(M)^n with M = A^-1 (d exp_p)_v
};

/// A loop is self-conjugate when (d exp_p)_v is singular; the test uses the
/// scale-free determinant `normalized` against tol.
SelfConjugacy is_self_conjugate(const SpacetimeModel& model, const LoopCandidate& loop,
                                double tol = 1e-6, double integrator_tol = kDefaultIntegratorTol);

}  // namespace timeloop
