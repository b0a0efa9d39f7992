#include "timeloop/hillclimb.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "newton.hpp"

namespace timeloop {
namespace {

/// Gauss-Legendre nodes and weights on [-1, 1].
std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int m) {
  std::vector<double> x(static_cast<std::size_t>(m)), w(static_cast<std::size_t>(m));
  for (int i = 0; i < (m + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (m + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= m; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = m * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[static_cast<std::size_t>(i)] = -z;
    x[static_cast<std::size_t>(m - 1 - i)] = z;
    w[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(m - 1 - i)] =
        2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

/// The loop's geodesic as a function of proper time, extended backwards
/// past the base point when needed.
class LoopCurve {
 public:
  LoopCurve(const SpacetimeModel& model, const LoopCandidate& loop, double back, double tol)
      : length_(loop.length),
        forward_(integrate_geodesic(model, loop.v, 1.0, tol)) {
    if (back > 0.0) backward_.emplace(integrate_geodesic(model, {loop.v.base, -loop.v.comp}, back / length_, tol));
  }

  Vec point(double t) const {
    const double s = t / length_;
    return s >= 0.0 ? forward_.point(s) : backward_->point(-s);
  }
  /// Affine velocity, |u| = length.
  Vec velocity(double t) const {
    const double s = t / length_;
    return s >= 0.0 ? Vec(forward_.velocity(s)) : Vec(-backward_->velocity(-s));
  }

 private:
  double length_;
  GeodesicSegment forward_;
  std::optional<GeodesicSegment> backward_;
};

double bilinear(const Mat& g, const Vec& a, const Vec& b) { return a.dot(g * b); }

double transverse_term(double F) { return F / (1.0 + std::sqrt(1.0 + F)); }

}  // namespace

const char* to_string(ClimbDirection d) {
  switch (d) {
    case ClimbDirection::stretch: return "stretch";
    case ClimbDirection::shorten: return "shorten";
    case ClimbDirection::automatic: return "auto";
  }
  return "?";
}

ClimbDirection parse_direction(const std::string& s) {
  if (s == "stretch") return ClimbDirection::stretch;
  if (s == "shorten") return ClimbDirection::shorten;
  if (s == "auto") return ClimbDirection::automatic;
  throw ConfigError("direction must be stretch, shorten or auto, got '" + s + "'");
}

const char* to_string(ClimbVerdict v) {
  switch (v) {
    case ClimbVerdict::closed_geodesic: return "closed_geodesic";
    case ClimbVerdict::self_conjugate_abort: return "self_conjugate_abort";
    case ClimbVerdict::chart_boundary_abort: return "chart_boundary_abort";
    case ClimbVerdict::budget_exhausted: return "budget_exhausted";
  }
  return "?";
}

RadialDecomposition radial_decomposition(const SpacetimeModel& model, const LoopCandidate& loop,
                                         double delta, double window, const RadialOptions& opts) {
  const double l = loop.length;
  if (!(l > 0.0) || model.classify(loop.v).character != Causal::timelike)
    throw PreconditionError("radial decomposition needs a timelike loop");
  if (!(std::abs(delta) < l) || !(window >= 0.0) || !(window < l))
    throw ConfigError("re-basing offset and window must be smaller than the loop length");
  const DeckElement deck = model.deck(loop.deck);
  const int n = model.dim();

  // Proper-time samples: the window grid, the quadrature nodes between 0 and delta, delta itself.
  const auto [gl_x, gl_w] = gauss_legendre(std::max(2, opts.quadrature_nodes));
  std::vector<double> ts{0.0, delta};
  if (window > 0.0 && opts.window_samples >= 2)
    for (int k = 0; k < opts.window_samples; ++k)
      ts.push_back(-window + 2.0 * window * k / (opts.window_samples - 1));
  for (double x : gl_x) ts.push_back(0.5 * delta * (1.0 + x));
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  const double back = std::max(0.0, -ts.front());
  const LoopCurve curve(model, loop, back, opts.integrator_tol);

  RadialDecomposition out;
  out.delta = delta;
  out.window = window;
  out.q = curve.point(delta);
  out.v_q = (1.0 - delta / l) * curve.velocity(delta);
  const Mat g_q = model.metric_at(out.q);

  SolverOptions solver;
  solver.tol = opts.solve_tol;
  solver.integrator_tol = opts.integrator_tol;
  solver.max_iter = 30;
  const Mat seeds = [n] {
    Mat s = Mat::Zero(2 * n, n);
    s.bottomRows(n).setIdentity();
    return s;
  }();

  auto sample_at = [&](double t, const Vec& guess) {
    RadialSample s;
    s.t = t;
    try {
      s.abar = solve_exp_inverse(model, out.q, deck.apply(curve.point(t)), guess, solver);
    } catch (const Error& e) {
      std::ostringstream os;
      os << "inverting exp at the re-based point failed at t=" << t << ": " << e.what();
      throw InversionFailure(os.str());
    }
    const FlowVariations fv = flow_variations(model, {out.q, s.abar}, 1.0, seeds, opts.integrator_tol);
    const double r2 = -bilinear(g_q, s.abar, s.abar);
    if (!(r2 > 0.0)) throw InversionFailure("re-based loop velocity is not timelike");
    s.r = std::sqrt(r2);
    s.w = s.abar / s.r;
    const Eigen::FullPivLU<Mat> lu(fv.dx);
    if (!lu.isInvertible()) throw InversionFailure("exp is singular along the window");
    const Vec abar_dot = lu.solve(deck.push(curve.velocity(t)) / l);
    s.rdot = -bilinear(g_q, s.abar, abar_dot) / s.r;
    const Vec df_dr = fv.dx * s.w;
    const Vec df_dt = fv.dx * (abar_dot - s.rdot * s.w);
    const Mat g_y = model.metric_at(fv.x);
    s.gauss_defect = bilinear(g_y, df_dr, df_dt);
    s.transverse_sq = bilinear(g_y, df_dt, df_dt);
    return std::pair{s, abar_dot};
  };

  // Continue outwards from t = 0 on each side, predicting with abar'.
  const auto zero = std::find(ts.begin(), ts.end(), 0.0);
  std::vector<RadialSample> samples(ts.size());
  const auto i0 = static_cast<std::size_t>(zero - ts.begin());
  auto [s0, d0] = sample_at(0.0, out.v_q);
  samples[i0] = s0;
  Vec prev = s0.abar, prev_dot = d0;
  double prev_t = 0.0;
  for (std::size_t i = i0 + 1; i < ts.size(); ++i) {
    auto [s, d] = sample_at(ts[i], prev + prev_dot * (ts[i] - prev_t));
    prev = s.abar, prev_dot = d, prev_t = ts[i];
    samples[i] = std::move(s);
  }
  prev = s0.abar, prev_dot = d0, prev_t = 0.0;
  for (std::size_t i = i0; i-- > 0;) {
    auto [s, d] = sample_at(ts[i], prev + prev_dot * (ts[i] - prev_t));
    prev = s.abar, prev_dot = d, prev_t = ts[i];
    samples[i] = std::move(s);
  }

  out.rdot_sign = samples[i0].rdot > 0.0 ? 1 : -1;
  out.min_abs_rdot = std::numeric_limits<double>::infinity();
  for (const RadialSample& s : samples) {
    if ((s.rdot > 0.0 ? 1 : -1) != out.rdot_sign)
      throw InversionFailure("r' changes sign on the window");
    out.min_abs_rdot = std::min(out.min_abs_rdot, std::abs(s.rdot));
    out.max_gauss_defect = std::max(out.max_gauss_defect, std::abs(s.gauss_defect));
    if (s.t == delta) out.abar_delta = s.abar;
  }
  for (std::size_t k = 0; k < gl_x.size(); ++k) {
    const double t = 0.5 * delta * (1.0 + gl_x[k]);
    const auto it = std::lower_bound(ts.begin(), ts.end(), t);
    out.eta += gl_w[k] * transverse_term(samples[static_cast<std::size_t>(it - ts.begin())].transverse_sq);
  }
  out.eta *= 0.5 * std::abs(delta);
  out.samples = std::move(samples);
  return out;
}

int base_rdot_sign(const SpacetimeModel& model, const LoopCandidate& loop, double integrator_tol) {
  const DeckElement deck = model.deck(loop.deck);
  const Mat D = dexp_matrix(model, loop.v, integrator_tol);
  const Vec abar_dot = D.fullPivLu().solve(deck.push(loop.v.comp) / loop.length);
  const double rdot = -model.inner(loop.base(), loop.v.comp, abar_dot) / loop.length;
  return rdot > 0.0 ? 1 : -1;
}

HillStep hill_step(const SpacetimeModel& model, const LoopCandidate& loop, double delta,
                   ClimbDirection direction, const HillStepOptions& opts) {
  if (direction == ClimbDirection::automatic)
    throw ConfigError("hill_step needs an explicit direction");
  if (!(delta > 0.0)) throw ConfigError("hill-climb step must be positive");
  const double l = loop.length;
  const int sign = base_rdot_sign(model, loop, opts.radial.integrator_tol);
  const bool stretch = direction == ClimbDirection::stretch;
  const double side = (sign < 0) == stretch ? -delta : delta;

  const RadialDecomposition rad = radial_decomposition(model, loop, side, 0.0, opts.radial);
  if (rad.rdot_sign != sign) throw InversionFailure("sign of r' differs between base points");

  HillStep step;
  step.side = side;
  step.delta = delta;
  step.direction = direction;
  step.eta = rad.eta;
  step.rdot_sign = sign;
  const double change = sign < 0 ? 2.0 * delta + rad.eta : rad.eta;
  step.predicted_length = stretch ? l + change : l - change;

  SolverOptions solver = opts.solver;
  solver.mode = ShootingMode::fixed_base;
  step.loop = find_loop(model, {rad.q, rad.abar_delta}, loop.deck, solver);
  step.length_change = step.loop.length - l;
  if (std::abs(step.length_change) < std::max(1e-12, 1e-9 * l)) {
    std::ostringstream os;
    os << "length changed by " << step.length_change << ", the loop is closed up to tolerance";
    throw DegenerateStep(os.str(), step.length_change);
  }
  return step;
}

bool is_closed_geodesic(const SpacetimeModel&, const LoopCandidate& loop, double tol) {
  return loop.converged && loop.closure_defect < tol;
}

LoopCandidate refine_closed_geodesic(const SpacetimeModel& model, const LoopCandidate& loop,
                                     double tol, int max_iter, double integrator_tol) {
  const int n = model.dim();
  const DeckElement d = model.deck(loop.deck);
  const Mat seeds = Mat::Identity(2 * n, 2 * n);
  auto eval = [&](const Vec& z, bool jac) {
    const Vec p = z.head(n), v = z.tail(n);
    model.require_in_domain(p);
    const FlowVariations fv =
        flow_variations(model, {p, v}, 1.0, jac ? seeds : Mat(2 * n, 0), integrator_tol);
    detail::Evaluation e;
    e.r.resize(2 * n);
    e.r << model.displacement(d.apply(p), fv.x), fv.u - d.push(v);
    if (jac) {
      e.J.resize(2 * n, 2 * n);
      e.J.topLeftCorner(n, n) = fv.dx.leftCols(n) - d.A;
      e.J.topRightCorner(n, n) = fv.dx.rightCols(n);
      e.J.bottomLeftCorner(n, n) = fv.du.leftCols(n);
      e.J.bottomRightCorner(n, n) = fv.du.rightCols(n) - d.A;
    }
    return e;
  };
  SolverOptions o;
  o.tol = tol;
  o.max_iter = max_iter;
  o.max_condition = std::numeric_limits<double>::infinity();
  Vec z0(2 * n);
  z0 << loop.v.base, loop.v.comp;
  const detail::NewtonOutcome res = detail::damped_newton(z0, eval, o);
  LoopCandidate out = evaluate_loop(model, {res.z.head(n), res.z.tail(n)}, d.label, tol, integrator_tol);
  out.iterations = res.iterations;
  if (res.status != detail::NewtonOutcome::Status::converged) {
    std::ostringstream os;
    os << "closed geodesic refinement stopped at residual " << res.norm;
    throw NoConvergence(os.str(), out);
  }
  if (model.classify(out.v).character != Causal::timelike)
    throw NoConvergence("closed geodesic refinement left the timelike cone", out);
  out.converged = true;
  return out;
}

namespace {

enum class StepOutcome { ok, retry, degenerate, boundary };

StepOutcome attempt(const SpacetimeModel& model, const LoopCandidate& loop, double delta,
                    ClimbDirection dir, const HillStepOptions& opts, HillStep& result,
                    std::string& note) {
  try {
    result = hill_step(model, loop, delta, dir, opts);
    const bool monotone = dir == ClimbDirection::stretch ? result.length_change > 0.0
                                                         : result.length_change < 0.0;
    if (!monotone) {
      note = "length moved against the requested direction";
      return StepOutcome::retry;
    }
    return StepOutcome::ok;
  } catch (const DegenerateStep& e) {
    note = e.what();
    return StepOutcome::degenerate;
  } catch (const DomainError& e) {
    note = e.what();
    return StepOutcome::boundary;
  } catch (const IntegrationError& e) {
    note = e.what();
    return e.chart_exit() ? StepOutcome::boundary : StepOutcome::retry;
  } catch (const InversionFailure& e) {
    note = e.what();
  } catch (const NoConvergence& e) {
    note = e.what();
  } catch (const SingularJacobian& e) {
    note = e.what();
  } catch (const PreconditionError& e) {
    note = e.what();
  }
  return StepOutcome::retry;
}

}  // namespace

HillClimbTrace hill_climb(const SpacetimeModel& model, const LoopCandidate& start,
                          ClimbDirection direction, const HillClimbParams& params) {
  if (!start.converged) throw PreconditionError("hill climb must start from a converged loop");
  if (model.classify(start.v).character != Causal::timelike)
    throw PreconditionError("hill climb needs a timelike loop");
  const double l0 = start.length;
  const double delta_min = params.delta_min > 0.0 ? params.delta_min : l0 * 1e-6;
  const double delta_max = params.delta_max > 0.0 ? params.delta_max : l0 / 4.0;
  double delta = params.delta0 > 0.0 ? params.delta0 : l0 / 50.0;
  delta = std::min(delta, delta_max);

  HillClimbTrace trace;
  trace.direction = direction == ClimbDirection::automatic ? ClimbDirection::shorten : direction;
  trace.final = start;
  if (is_closed_geodesic(model, start, params.closure_tol)) {
    trace.verdict = ClimbVerdict::closed_geodesic;
    return trace;
  }
  if (is_self_conjugate(model, start, params.self_conjugate_tol).self_conjugate) {
    trace.verdict = ClimbVerdict::self_conjugate_abort;
    trace.note = "start loop is self-conjugate";
    return trace;
  }

  auto try_refine = [&](const LoopCandidate& loop) {
    try {
      LoopCandidate refined = refine_closed_geodesic(model, loop);
      if (refined.closure_defect < params.closure_tol) {
        trace.final = std::move(refined);
        trace.refined = true;
        trace.verdict = ClimbVerdict::closed_geodesic;
        return true;
      }
    } catch (const Error& e) {
      trace.note = e.what();
    }
    return false;
  };

  LoopCandidate current = start;
  std::optional<HillStep> pending;
  if (direction == ClimbDirection::automatic) {
    // Probe both directions with the first step and keep the one that closes up better.
    for (ClimbDirection dir : {ClimbDirection::stretch, ClimbDirection::shorten}) {
      HillStep probe;
      std::string note;
      if (attempt(model, current, delta, dir, params.step, probe, note) != StepOutcome::ok) continue;
      if (!pending || probe.loop.closure_defect < pending->loop.closure_defect) {
        pending = std::move(probe);
        trace.direction = dir;
      }
    }
  }

  int attempts = 0;
  while (static_cast<int>(trace.steps.size()) < params.max_steps && attempts < 8 * params.max_steps) {
    ++attempts;
    HillStep step;
    StepOutcome outcome = StepOutcome::ok;
    if (pending) {
      step = std::move(*pending);
      pending.reset();
    } else {
      outcome = attempt(model, current, delta, trace.direction, params.step, step, trace.note);
    }
    if (outcome == StepOutcome::boundary) {
      trace.verdict = ClimbVerdict::chart_boundary_abort;
      trace.final = current;
      return trace;
    }
    if (outcome == StepOutcome::degenerate) {
      if (try_refine(current)) return trace;
      outcome = StepOutcome::retry;
    }
    if (outcome == StepOutcome::retry) {
      delta *= 0.5;
      if (delta < delta_min) {
        // No admissible step size is left; the loop may already be closed.
        if (try_refine(current)) return trace;
        break;
      }
      continue;
    }
    trace.steps.push_back(step);
    current = step.loop;
    trace.final = current;
    if (is_closed_geodesic(model, current, params.closure_tol)) {
      trace.verdict = ClimbVerdict::closed_geodesic;
      return trace;
    }
    if (is_self_conjugate(model, current, params.self_conjugate_tol).self_conjugate) {
      trace.verdict = ClimbVerdict::self_conjugate_abort;
      trace.note = "loop became self-conjugate";
      return trace;
    }
    delta = std::min(2.0 * delta, delta_max);
  }
  trace.final = current;
  trace.verdict = ClimbVerdict::budget_exhausted;
  return trace;
}

}  // namespace timeloop
