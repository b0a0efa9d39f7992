#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "timeloop/geodesic.hpp"
#include "timeloop/loop.hpp"

namespace timeloop {

/// Newton iteration ran out of budget or its line search collapsed.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, LoopCandidate best)
      : Error(what), best_(std::move(best)) {}
  const LoopCandidate& best() const noexcept { return best_; }

 private:
  LoopCandidate best_;
};

/// The shooting Jacobian became too ill-conditioned before convergence,
/// which happens near self-conjugate loops.
class SingularJacobian : public Error {
 public:
  SingularJacobian(const std::string& what, LoopCandidate best, double condition)
      : Error(what), best_(std::move(best)), condition_(condition) {}
  const LoopCandidate& best() const noexcept { return best_; }
  double condition() const noexcept { return condition_; }

 private:
  LoopCandidate best_;
  double condition_;
};

enum class ShootingMode { fixed_base, free_base };

struct SolverOptions {
  double tol = 1e-10;  // accept when the residual norm drops below this
  int max_iter = 50;
  ShootingMode mode = ShootingMode::fixed_base;
  // Tighter than the geodesic default so the residual floor sits well below tol.
  double integrator_tol = 1e-12;
  double max_condition = 1e12;
};

struct LoopResidual {
  Vec residual;
  double norm = 0.0;
};

/// exp_p(v) - deck(p) in chart coordinates, wrapped on periodic coordinates.
LoopResidual loop_residual(const SpacetimeModel& model, const TangentVec& v,
                           const DeckElement& deck, double integrator_tol = kDefaultIntegratorTol);

/// Integrates the loop and fills every diagnostic field; `converged` is set
/// from accept_tol.
LoopCandidate evaluate_loop(const SpacetimeModel& model, const TangentVec& v,
                            const std::string& deck, double accept_tol = 1e-10,
                            double integrator_tol = kDefaultIntegratorTol);

/// Damped Newton shooting for a timelike loop in the class `deck`. The step
/// solves with the pseudo-inverse of the shooting Jacobian, so loops lying
/// in continuous families (for example around a periodic chart coordinate)
/// are reached with a minimal-norm correction.
LoopCandidate find_loop(const SpacetimeModel& model, const TangentVec& seed,
                        const std::string& deck, const SolverOptions& opts = {});

/// Solves exp_q(a) = target for a, starting from `seed`. Throws
/// NoConvergence or SingularJacobian.
Vec solve_exp_inverse(const SpacetimeModel& model, const Vec& q, const Vec& target,
                      const Vec& seed, const SolverOptions& opts = {});

/// First loop found at p over the model's loop classes, seeded with the
/// straight chord p -> deck(p). Throws ConfigError("no loop class available")
/// when the model has no classes, NoConvergence when every class fails.
LoopCandidate find_any_loop(const SpacetimeModel& model, const Vec& p,
                            const SolverOptions& opts = {});

/// Initial velocity of the chart chord from p to deck(p); for the identity
/// class on a periodic chart the chord winds once around each period.
Vec chord_seed(const SpacetimeModel& model, const Vec& p, const DeckElement& deck);

struct ContinuationOptions {
  int steps = 8;
  double step_bound = 0.0;  // 0 selects 10 x the base increment
  SolverOptions solver{};
};

/// Loops traced along a base-point path by predictor-corrector continuation.
struct HomotopyPath {
  std::vector<LoopCandidate> nodes;
  std::vector<Vec> base_curve;
  double step_bound = 0.0;
  bool continuous = true;
  bool complete = false;
  std::string event;       // empty, or singular_jacobian / no_convergence / integration_error / domain_error
  std::string event_what;
  double event_s = 0.0;    // path parameter in [0, 1] of the failed node
  Vec event_base;
};

/// Moves the base point along the straight chart segment start.base ->
/// base_target in `steps` increments. Each node is predicted by secant
/// extrapolation and corrected by fixed-base Newton shooting. Stops at the
/// first failure and returns the partial path with the event recorded.
HomotopyPath continuation_path(const SpacetimeModel& model, const LoopCandidate& start,
                               const Vec& base_target, const ContinuationOptions& opts = {});

/// Same, following the given base points (the first must equal start.base).
HomotopyPath continuation_path(const SpacetimeModel& model, const LoopCandidate& start,
                               const std::vector<Vec>& base_path,
                               const ContinuationOptions& opts = {});

struct SamplerOptions {
  int n_samples = 16;
  double radius = 0.5;
  int steps = 8;
  std::uint64_t seed = 1;
  SolverOptions solver{};
};

/// Sampled (not certified) length extrema over the loops reachable from
/// start by continuation towards random base points.
struct ClassBounds {
  double l_est = 0.0;
  double L_est = 0.0;
  LoopCandidate argmin;
  LoopCandidate argmax;
  int loops_visited = 0;
  int warnings = 0;  // walks that stopped early
  bool estimated = true;
  std::vector<HomotopyPath> walks;
};

ClassBounds class_length_bounds(const SpacetimeModel& model, const LoopCandidate& start,
                                const SamplerOptions& opts = {});

}  // namespace timeloop
