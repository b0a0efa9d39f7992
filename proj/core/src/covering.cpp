#include "timeloop/covering.hpp"

#include <algorithm>
#include <cmath>

#include "timeloop/loopspace.hpp"
#include "timeloop/random.hpp"

namespace timeloop {
namespace {

void require_flat(const SpacetimeModel& model) {
  if (!model.geometry().is_flat())
    throw ConfigError("Lorentzian distance is only implemented for flat models, not '" +
                      model.name() + "'");
}

void require_isometry(const SpacetimeModel& model, const DeckElement& deck) {
  const int n = model.dim();
  if (deck.A.rows() != n || deck.A.cols() != n || deck.b.size() != n)
    throw ConfigError("deck element '" + deck.label + "' has the wrong dimension");
  const Mat g = model.metric_at(Vec::Zero(n));
  if ((deck.A.transpose() * g * deck.A - g).cwiseAbs().maxCoeff() > 1e-10)
    throw ConfigError("deck element '" + deck.label + "' is not an isometry");
}

bool future_causal_or_zero(const SpacetimeModel& model, const Vec& p, const Vec& d, bool timelike) {
  if (d.isZero(0.0)) return true;
  const CausalTag tag = model.classify({p, d});
  if (tag.orientation != Orientation::future) return false;
  return timelike ? tag.character == Causal::timelike : tag.causal();
}

std::vector<Vec> sample_points(int n, const CoveringSampling& s) {
  if (s.samples < 1) throw ConfigError("at least one sample point is required");
  Rng rng(s.seed);
  std::vector<Vec> pts;
  pts.reserve(static_cast<std::size_t>(s.samples));
  for (int i = 0; i < s.samples; ++i) pts.push_back(rng.uniform_box(n, s.radius));
  return pts;
}

}  // namespace

double lorentz_distance_flat(const SpacetimeModel& model, const Vec& a, const Vec& b) {
  require_flat(model);
  if (a.size() != model.dim() || b.size() != model.dim())
    throw ConfigError("points must have the model dimension");
  const Vec d = b - a;
  if (!future_causal_or_zero(model, a, d, false)) return 0.0;
  return std::sqrt(std::max(0.0, -model.inner(a, d, d)));
}

double lorentz_distance_flat(const Vec& a, const Vec& b) {
  return lorentz_distance_flat(minkowski(static_cast<int>(a.size())), a, b);
}

bool is_future_timelike_isometry(const SpacetimeModel& model, const DeckElement& deck,
                                 const CoveringSampling& sampling) {
  require_flat(model);
  require_isometry(model, deck);
  const int n = model.dim();
  if (deck.is_translation()) return future_causal_or_zero(model, Vec::Zero(n), deck.b, true);
  for (const Vec& p : sample_points(n, sampling))
    if (!future_causal_or_zero(model, p, deck.apply(p) - p, true)) return false;
  return true;
}

IsometryReport is_clifford_translation(const SpacetimeModel& model, const DeckElement& deck,
                                       const CoveringSampling& sampling, double tol) {
  require_flat(model);
  require_isometry(model, deck);
  IsometryReport out;
  out.deck = deck;
  out.future_timelike = is_future_timelike_isometry(model, deck, sampling);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const Vec& p : sample_points(model.dim(), sampling)) {
    const double d = lorentz_distance_flat(model, p, deck.apply(p));
    lo = std::min(lo, d);
    hi = std::max(hi, d);
    out.distance_samples.push_back({p, d});
  }
  out.distance_spread = hi - lo;
  out.clifford = out.distance_spread < tol;
  return out;
}

LoopCandidate closed_geodesic_from_clifford(const SpacetimeModel& model, const std::string& deck,
                                            const Vec& p, const CoveringSampling& sampling) {
  const DeckElement rho = model.deck(deck);
  if (rho.is_identity()) throw PreconditionError("the identity is not a non-trivial translation");
  if (!is_future_timelike_isometry(model, rho, sampling))
    throw PreconditionError("deck element '" + rho.label + "' is not future timelike");
  const IsometryReport report = is_clifford_translation(model, rho, sampling,
                                                        1e-12 * std::max(1.0, rho.b.norm()));
  if (!report.clifford)
    throw PreconditionError("deck element '" + rho.label + "' is not a Clifford translation");
  model.require_in_domain(p);
  LoopCandidate loop = evaluate_loop(model, {p, rho.apply(p) - p}, rho.label);
  if (!loop.converged || model.classify(loop.v).character != Causal::timelike)
    throw PreconditionError("segment to the deck image does not close up as a timelike loop");
  return loop;
}

DeckElement find_clifford_class(const SpacetimeModel& model, const CoveringSampling& sampling) {
  require_flat(model);
  for (const DeckElement& d : model.loop_classes()) {
    if (d.is_identity()) continue;
    if (!is_future_timelike_isometry(model, d, sampling)) continue;
    if (is_clifford_translation(model, d, sampling, 1e-12 * std::max(1.0, d.b.norm())).clifford)
      return d;
  }
  throw ConfigError("no future timelike Clifford translation among the loop classes");
}

std::vector<LoopCandidate> closed_geodesics_through(const SpacetimeModel& model,
                                                    const std::vector<Vec>& points,
                                                    const CoveringSampling& sampling) {
  const DeckElement rho = find_clifford_class(model, sampling);
  std::vector<LoopCandidate> out;
  out.reserve(points.size());
  for (const Vec& p : points) out.push_back(closed_geodesic_from_clifford(model, rho.label, p, sampling));
  return out;
}

}  // namespace timeloop
