#include "timeloop/loopspace.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <sstream>

#include "timeloop/random.hpp"
#include "newton.hpp"

namespace timeloop {
namespace {

using detail::Evaluation;
using detail::NewtonOutcome;
using detail::damped_newton;

Mat identity_seeds(int n, int offset_rows, int cols) {
  Mat s = Mat::Zero(2 * n, cols);
  s.block(offset_rows, 0, cols, cols).setIdentity();
  return s;
}

std::string describe(const char* what, const NewtonOutcome& r) {
  std::ostringstream os;
  os << what << " after " << r.iterations << " iterations (residual " << r.norm;
  if (r.status == NewtonOutcome::Status::singular) os << ", condition " << r.condition;
  os << ")";
  return os.str();
}

}  // namespace

LoopResidual loop_residual(const SpacetimeModel& model, const TangentVec& v,
                           const DeckElement& deck, double integrator_tol) {
  const Vec end = exp_map(model, v, integrator_tol);
  LoopResidual out;
  out.residual = model.displacement(deck.apply(v.base), end);
  out.norm = out.residual.norm();
  return out;
}

LoopCandidate evaluate_loop(const SpacetimeModel& model, const TangentVec& v,
                            const std::string& deck, double accept_tol, double integrator_tol) {
  const DeckElement d = model.deck(deck);
  const GeodesicSegment seg = integrate_geodesic(model, v, 1.0, integrator_tol);
  LoopCandidate out;
  out.v = v;
  out.deck = d.label;
  out.end_point = seg.end_point();
  out.end_velocity = seg.end_velocity();
  out.residual = model.displacement(d.apply(v.base), out.end_point);
  out.residual_norm = out.residual.norm();
  out.length = model.norm(v);
  out.closure_defect = (out.end_velocity - d.push(v.comp)).norm();
  out.converged = out.residual_norm < accept_tol;
  return out;
}

LoopCandidate find_loop(const SpacetimeModel& model, const TangentVec& seed,
                        const std::string& deck, const SolverOptions& opts) {
  if (!(opts.tol >= 1e-12)) throw ConfigError("loop solver tolerance must be at least 1e-12");
  if (opts.max_iter < 1) throw ConfigError("loop solver needs at least one iteration");
  const int n = model.dim();
  if (seed.dim() != n || seed.comp.size() != n)
    throw ConfigError("seed dimension does not match the model");
  if (!seed.finite()) throw DomainError("seed has non-finite entries");
  model.require_in_domain(seed.base);
  if (model.classify(seed).character != Causal::timelike)
    throw PreconditionError("loop seed must be timelike");
  const DeckElement d = model.deck(deck);
  const double itol = opts.integrator_tol;

  NewtonOutcome res;
  if (opts.mode == ShootingMode::fixed_base) {
    const Vec p = seed.base;
    const Vec target = d.apply(p);
    const Mat seeds = identity_seeds(n, n, n);
    auto eval = [&](const Vec& v, bool jac) {
      Evaluation e;
      if (jac) {
        const FlowVariations fv = flow_variations(model, {p, v}, 1.0, seeds, itol);
        e.r = model.displacement(target, fv.x);
        e.J = fv.dx;
      } else {
        e.r = model.displacement(target, exp_map(model, {p, v}, itol));
      }
      return e;
    };
    res = damped_newton(seed.comp, eval, opts);
    res.z = (Vec(2 * n) << p, res.z).finished();
  } else {
    const Mat seeds = Mat::Identity(2 * n, 2 * n);
    auto eval = [&](const Vec& z, bool jac) {
      const Vec p = z.head(n), v = z.tail(n);
      model.require_in_domain(p);
      Evaluation e;
      if (jac) {
        const FlowVariations fv = flow_variations(model, {p, v}, 1.0, seeds, itol);
        e.r = model.displacement(d.apply(p), fv.x);
        e.J.resize(n, 2 * n);
        e.J.leftCols(n) = fv.dx.leftCols(n) - d.A;
        e.J.rightCols(n) = fv.dx.rightCols(n);
      } else {
        e.r = model.displacement(d.apply(p), exp_map(model, {p, v}, itol));
      }
      return e;
    };
    Vec z0(2 * n);
    z0 << seed.base, seed.comp;
    res = damped_newton(z0, eval, opts);
  }

  LoopCandidate best = evaluate_loop(model, {res.z.head(n), res.z.tail(n)}, d.label, opts.tol, itol);
  best.iterations = res.iterations;
  switch (res.status) {
    case NewtonOutcome::Status::converged: break;
    case NewtonOutcome::Status::singular:
      throw SingularJacobian(describe("shooting Jacobian is singular", res), best, res.condition);
    case NewtonOutcome::Status::collapse:
      throw NoConvergence(describe("line search collapsed", res), best);
    case NewtonOutcome::Status::budget:
      throw NoConvergence(describe("iteration budget exhausted", res), best);
  }
  if (model.classify(best.v).character != Causal::timelike)
    throw NoConvergence("shooting converged to a non-timelike loop", best);
  best.converged = true;
  return best;
}

Vec solve_exp_inverse(const SpacetimeModel& model, const Vec& q, const Vec& target,
                      const Vec& seed, const SolverOptions& opts) {
  const int n = model.dim();
  const Mat seeds = identity_seeds(n, n, n);
  const double itol = opts.integrator_tol;
  auto eval = [&](const Vec& a, bool jac) {
    Evaluation e;
    if (jac) {
      const FlowVariations fv = flow_variations(model, {q, a}, 1.0, seeds, itol);
      e.r = model.displacement(target, fv.x);
      e.J = fv.dx;
    } else {
      e.r = model.displacement(target, exp_map(model, {q, a}, itol));
    }
    return e;
  };
  const NewtonOutcome res = damped_newton(seed, eval, opts);
  if (res.status == NewtonOutcome::Status::converged) return res.z;
  LoopCandidate best;
  best.v = {q, res.z};
  best.residual = res.r;
  best.residual_norm = res.norm;
  best.iterations = res.iterations;
  if (res.status == NewtonOutcome::Status::singular)
    throw SingularJacobian(describe("exponential map is singular", res), best, res.condition);
  throw NoConvergence(describe("exponential map inversion failed", res), best);
}

Vec chord_seed(const SpacetimeModel& model, const Vec& p, const DeckElement& deck) {
  Vec v = deck.apply(p) - p;
  if (deck.is_identity()) v += model.geometry().periods();
  return v;
}

LoopCandidate find_any_loop(const SpacetimeModel& model, const Vec& p, const SolverOptions& opts) {
  const std::vector<DeckElement> classes = model.loop_classes();
  if (classes.empty()) throw ConfigError("no loop class available");
  std::optional<LoopCandidate> best;
  for (const DeckElement& d : classes) {
    const TangentVec seed{p, chord_seed(model, p, d)};
    const CausalTag tag = model.classify(seed);
    if (tag.character != Causal::timelike || tag.orientation != Orientation::future) continue;
    try {
      return find_loop(model, seed, d.label, opts);
    } catch (const NoConvergence& e) {
      if (!best || e.best().residual_norm < best->residual_norm) best = e.best();
    } catch (const SingularJacobian& e) {
      if (!best || e.best().residual_norm < best->residual_norm) best = e.best();
    } catch (const IntegrationError&) {
    }
  }
  if (!best) throw ConfigError("no loop class available");
  throw NoConvergence("no loop class converged at the requested point", *best);
}

HomotopyPath continuation_path(const SpacetimeModel& model, const LoopCandidate& start,
                               const Vec& base_target, const ContinuationOptions& opts) {
  if (opts.steps < 1) throw ConfigError("continuation needs at least one step");
  if (base_target.size() != model.dim()) throw ConfigError("base target dimension mismatch");
  std::vector<Vec> path;
  path.reserve(static_cast<std::size_t>(opts.steps) + 1);
  for (int k = 0; k <= opts.steps; ++k)
    path.push_back(start.base() + (base_target - start.base()) * (static_cast<double>(k) / opts.steps));
  path.back() = base_target;
  return continuation_path(model, start, path, opts);
}

HomotopyPath continuation_path(const SpacetimeModel& model, const LoopCandidate& start,
                               const std::vector<Vec>& base_path, const ContinuationOptions& opts) {
  if (!start.converged) throw PreconditionError("continuation must start from a converged loop");
  if (base_path.size() < 2) throw ConfigError("continuation path needs at least two base points");
  if ((base_path.front() - start.base()).norm() > 1e-12)
    throw ConfigError("continuation path must start at the loop's base point");

  HomotopyPath out;
  double max_increment = 0.0;
  for (std::size_t k = 1; k < base_path.size(); ++k)
    max_increment = std::max(max_increment, (base_path[k] - base_path[k - 1]).norm());
  out.step_bound = opts.step_bound > 0.0 ? opts.step_bound : std::max(1e-12, 10.0 * max_increment);
  out.nodes.push_back(start);
  out.base_curve.push_back(start.base());

  SolverOptions solver = opts.solver;
  solver.mode = ShootingMode::fixed_base;
  const double steps = static_cast<double>(base_path.size() - 1);
  for (std::size_t k = 1; k < base_path.size(); ++k) {
    const Vec& prev = out.nodes.back().v.comp;
    Vec predicted = prev;
    if (out.nodes.size() >= 2) predicted = 2.0 * prev - out.nodes[out.nodes.size() - 2].v.comp;
    if (model.classify({base_path[k], predicted}).character != Causal::timelike) predicted = prev;
    auto fail = [&](const char* event, const std::string& what) {
      out.event = event;
      out.event_what = what;
      out.event_s = static_cast<double>(k) / steps;
      out.event_base = base_path[k];
    };
    try {
      LoopCandidate node = find_loop(model, {base_path[k], predicted}, start.deck, solver);
      const LoopCandidate& last = out.nodes.back();
      Vec diff(2 * model.dim());
      diff << node.base() - last.base(), node.v.comp - last.v.comp;
      if (diff.norm() >= out.step_bound) out.continuous = false;
      out.nodes.push_back(std::move(node));
      out.base_curve.push_back(base_path[k]);
    } catch (const SingularJacobian& e) {
      fail("singular_jacobian", e.what());
      break;
    } catch (const NoConvergence& e) {
      fail("no_convergence", e.what());
      break;
    } catch (const IntegrationError& e) {
      fail("integration_error", e.what());
      break;
    } catch (const DomainError& e) {
      fail("domain_error", e.what());
      break;
    } catch (const PreconditionError& e) {
      fail("no_convergence", e.what());
      break;
    }
  }
  out.complete = out.event.empty();
  return out;
}

ClassBounds class_length_bounds(const SpacetimeModel& model, const LoopCandidate& start,
                                const SamplerOptions& opts) {
  if (!start.converged) throw PreconditionError("class sampling must start from a converged loop");
  if (opts.n_samples < 0) throw ConfigError("sample count must be non-negative");
  if (!(opts.radius > 0.0)) throw ConfigError("sampling radius must be positive");
  Rng rng(opts.seed);
  std::vector<Vec> targets;
  for (int i = 0; i < opts.n_samples; ++i)
    targets.push_back(start.base() + rng.uniform_ball(model.dim(), opts.radius));

  ContinuationOptions copts;
  copts.steps = opts.steps;
  copts.solver = opts.solver;
  std::vector<std::future<HomotopyPath>> jobs;
  jobs.reserve(targets.size());
  for (const Vec& target : targets)
    jobs.push_back(std::async(std::launch::async, [&model, &start, target, copts] {
      return continuation_path(model, start, target, copts);
    }));

  ClassBounds out;
  out.argmin = out.argmax = start;
  out.l_est = out.L_est = start.length;
  out.loops_visited = 1;
  for (auto& job : jobs) {
    HomotopyPath path = job.get();
    if (!path.complete) ++out.warnings;
    for (std::size_t k = 1; k < path.nodes.size(); ++k) {
      const LoopCandidate& node = path.nodes[k];
      ++out.loops_visited;
      if (node.length < out.l_est) {
        out.l_est = node.length;
        out.argmin = node;
      }
      if (node.length > out.L_est) {
        out.L_est = node.length;
        out.argmax = node;
      }
    }
    out.walks.push_back(std::move(path));
  }
  return out;
}

}  // namespace timeloop
