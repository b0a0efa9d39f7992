#pragma once

#include <string>
#include <vector>

#include "timeloop/jacobi.hpp"
#include "timeloop/loopspace.hpp"

namespace timeloop {

/// One sample of the polar description of a loop seen from a nearby base q.
/// abar(t) = exp_q^-1(deck(gamma(t))), r = |abar|, w = abar / r, and
/// f(r, t) = exp_q(r w(t)).
struct RadialSample {
  double t;       // proper time along the loop, 0 = the loop's base point
  Vec abar;
  double r;
  Vec w;
  double rdot;
  double transverse_sq;  // g(df/dt, df/dt)
  double gauss_defect;   // g(df/dr, df/dt)
};

struct RadialDecomposition {
  Vec q;               // gamma(delta), in the covering chart
  Vec v_q;             // abar(0): loop velocity re-based at q
  double delta = 0.0;  // signed proper-time offset of q along the loop
  double window = 0.0; // samples cover [-window, window]
  std::vector<RadialSample> samples;  // ascending t
  int rdot_sign = 0;
  double eta = 0.0;    // integral of F / (1 + sqrt(1 + F)) between 0 and delta, F = g(df/dt, df/dt)
  Vec abar_delta;      // abar(delta): a loop based at q in the same class
  double min_abs_rdot = 0.0;
  double max_gauss_defect = 0.0;
};

struct RadialOptions {
  int window_samples = 9;
  int quadrature_nodes = 12;
  double integrator_tol = 1e-12;
  double solve_tol = 1e-12;
};

/// Re-bases the loop at q = gamma(delta) and inverts exp_q along the loop on
/// [-window, window] and on the interval between 0 and delta. Throws
/// InversionFailure when an inversion fails or r' changes sign.
RadialDecomposition radial_decomposition(const SpacetimeModel& model, const LoopCandidate& loop,
                                         double delta, double window,
                                         const RadialOptions& opts = {});

/// Sign of r' at the loop's own base point.
int base_rdot_sign(const SpacetimeModel& model, const LoopCandidate& loop,
                   double integrator_tol = 1e-12);

enum class ClimbDirection { stretch, shorten, automatic };
const char* to_string(ClimbDirection d);
ClimbDirection parse_direction(const std::string& s);

struct HillStepOptions {
  RadialOptions radial{};
  SolverOptions solver{};
};

struct HillStep {
  LoopCandidate loop;
  double side = 0.0;   // signed offset of the new base along the old loop
  double delta = 0.0;
  ClimbDirection direction = ClimbDirection::stretch;
  double eta = 0.0;
  int rdot_sign = 0;
  double predicted_length = 0.0;
  double length_change = 0.0;
};

/// One deformation step. The side of the new base follows the sign of r' at
/// the base point: for r' < 0, -delta stretches by 2 delta + eta and +delta
/// shortens by the same; for r' > 0, +delta stretches by eta and -delta
/// shortens by eta. Throws DegenerateStep when the length change is below
/// max(1e-12, 1e-9 length).
HillStep hill_step(const SpacetimeModel& model, const LoopCandidate& loop, double delta,
                   ClimbDirection direction, const HillStepOptions& opts = {});

enum class ClimbVerdict { closed_geodesic, self_conjugate_abort, chart_boundary_abort, budget_exhausted };
const char* to_string(ClimbVerdict v);

struct HillClimbParams {
  double delta0 = 0.0;     // 0 selects length / 50
  double delta_min = 0.0;  // 0 selects length * 1e-6
  double delta_max = 0.0;  // 0 selects length / 4
  double closure_tol = 1e-8;
  double self_conjugate_tol = 1e-6;
  int max_steps = 200;
  HillStepOptions step{};
};

struct HillClimbTrace {
  std::vector<HillStep> steps;
  ClimbDirection direction = ClimbDirection::stretch;
  ClimbVerdict verdict = ClimbVerdict::budget_exhausted;
  LoopCandidate final;
  bool refined = false;  // final loop came from the closed-geodesic refinement
  std::string note;
};

HillClimbTrace hill_climb(const SpacetimeModel& model, const LoopCandidate& start,
                          ClimbDirection direction, const HillClimbParams& params = {});

/// closure_defect < tol.
bool is_closed_geodesic(const SpacetimeModel& model, const LoopCandidate& loop, double tol = 1e-8);

/// Gauss-Newton on (base, velocity) for exp_p(v) = deck(p) together with
/// gamma'(1) = d(deck)(v), using minimal-norm steps. Throws NoConvergence.
LoopCandidate refine_closed_geodesic(const SpacetimeModel& model, const LoopCandidate& loop,
                                     double tol = 1e-10, int max_iter = 30,
                                     double integrator_tol = 1e-12);

}  // namespace timeloop
