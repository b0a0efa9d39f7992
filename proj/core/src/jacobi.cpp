#include "timeloop/jacobi.hpp"

#include <algorithm>
#include <cmath>

namespace timeloop {
namespace {

/// Matrix G with G(a, c) = Gamma^a_{bc}(x) u^b, so that Gamma(u, J) = G J.
Mat gamma_along(const SpacetimeModel& model, const Vec& x, const Vec& u) {
  const int n = model.dim();
  const Christoffel gamma = model.christoffel_at(x);
  Mat G = Mat::Zero(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = 0; c < n; ++c) G(a, c) += gamma(a, b, c) * u[b];
  return G;
}

Mat dexp_seeds(int n) {
  Mat seeds = Mat::Zero(2 * n, n);
  seeds.bottomRows(n).setIdentity();
  return seeds;
}

double normalized_det(const DenseTrajectory& flow, int n, double t) {
  if (t == 0.0) return 1.0;
  const FlowVariations fv = unpack_flow_state(flow.at(t), n, n);
  return fv.dx.determinant() / std::pow(t, n);
}

double bisect_sign_change(const DenseTrajectory& flow, int n, double a, double b, double fa,
                          double tol) {
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = normalized_det(flow, n, m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

/// Golden-section minimization of |D| on [a, b].
std::pair<double, double> minimize_abs(const DenseTrajectory& flow, int n, double a, double b,
                                       double tol) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = std::abs(normalized_det(flow, n, x1));
  double f2 = std::abs(normalized_det(flow, n, x2));
  while (b - a > tol) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = std::abs(normalized_det(flow, n, x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = std::abs(normalized_det(flow, n, x2));
    }
  }
  const double t = 0.5 * (a + b);
  return {t, std::abs(normalized_det(flow, n, t))};
}

std::vector<double> sample_grid(const DenseTrajectory& flow, double T, const ConjugateOptions& o) {
  std::vector<double> grid;
  const auto& nodes = flow.nodes();
  const int per = std::max(1, o.samples_per_step);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
    for (int k = 0; k < per; ++k) grid.push_back(nodes[i] + (nodes[i + 1] - nodes[i]) * k / per);
  for (int k = 0; k <= o.min_samples; ++k) grid.push_back(T * k / o.min_samples);
  grid.push_back(T);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [T](double a, double b) { return std::abs(a - b) <= 1e-14 * T; }),
             grid.end());
  grid.back() = T;
  return grid;
}

DenseTrajectory dexp_flow(const SpacetimeModel& model, const GeodesicSegment& seg, double tol) {
  if (seg.character().character == Causal::spacelike)
    throw PreconditionError("conjugate points are only computed along causal geodesics");
  DenseTrajectory flow;
  flow_variations(model, seg.initial(), seg.T(), dexp_seeds(model.dim()), tol, &flow);
  return flow;
}

}  // namespace

JacobiPropagator::JacobiPropagator(const GeodesicSegment& seg, double tol) : seg_(seg) {
  const SpacetimeModel& model = seg_.model();
  const int n = model.dim();
  const Mat G0 = gamma_along(model, seg_.initial().base, seg_.initial().comp);
  to_chart0_ = Mat::Identity(2 * n, 2 * n);
  to_chart0_.bottomLeftCorner(n, n) = -G0;
  flow_variations(model, seg_.initial(), seg_.T(), to_chart0_, tol, &flow_);
}

Mat JacobiPropagator::transition(double t) const {
  const int n = seg_.model().dim();
  const FlowVariations fv = unpack_flow_state(flow_.at(t), n, 2 * n);
  const Mat G = gamma_along(seg_.model(), fv.x, fv.u);
  Mat out(2 * n, 2 * n);
  out.topRows(n) = fv.dx;
  out.bottomRows(n) = fv.du + G * fv.dx;
  return out;
}

std::pair<Vec, Vec> JacobiPropagator::propagate(double t, const Vec& J0, const Vec& J0dot) const {
  const int n = seg_.model().dim();
  Vec xi(2 * n);
  xi << J0, J0dot;
  const Vec out = transition(t) * xi;
  return {out.head(n), out.tail(n)};
}

std::vector<JacobiSample> jacobi_propagate(const SpacetimeModel& model, const GeodesicSegment& seg,
                                           const Vec& J0, const Vec& J0dot, int count) {
  if (J0.size() != model.dim() || J0dot.size() != model.dim())
    throw ConfigError("Jacobi initial data must have the model dimension");
  if (count < 2) throw ConfigError("Jacobi sampling needs at least 2 points");
  const JacobiPropagator prop(seg, seg.tol());
  std::vector<JacobiSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = i == count - 1 ? seg.T() : seg.T() * i / (count - 1);
    auto [J, Jdot] = prop.propagate(t, J0, J0dot);
    out.push_back({t, std::move(J), std::move(Jdot)});
  }
  return out;
}

Vec dexp(const SpacetimeModel& model, const TangentVec& v, const Vec& w, double tol) {
  const int n = model.dim();
  if (w.size() != n) throw ConfigError("dexp direction must have the model dimension");
  Mat seed = Mat::Zero(2 * n, 1);
  seed.bottomRows(n) = w;
  return flow_variations(model, v, 1.0, seed, tol).dx.col(0);
}

Mat dexp_matrix(const SpacetimeModel& model, const TangentVec& v, double tol) {
  return flow_variations(model, v, 1.0, dexp_seeds(model.dim()), tol).dx;
}

DeterminantProfile determinant_profile(const SpacetimeModel& model, const GeodesicSegment& seg,
                                       const ConjugateOptions& opts) {
  const DenseTrajectory flow = dexp_flow(model, seg, opts.integrator_tol);
  DeterminantProfile out;
  for (double t : sample_grid(flow, seg.T(), opts)) {
    out.t.push_back(t);
    out.value.push_back(normalized_det(flow, model.dim(), t));
  }
  return out;
}

std::vector<double> conjugate_points(const SpacetimeModel& model, const GeodesicSegment& seg,
                                     const ConjugateOptions& opts) {
  const int n = model.dim();
  const double T = seg.T();
  const DenseTrajectory flow = dexp_flow(model, seg, opts.integrator_tol);
  const std::vector<double> grid = sample_grid(flow, T, opts);
  std::vector<double> D(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) D[i] = normalized_det(flow, n, grid[i]);

  std::vector<double> found;
  auto add = [&found, T](double t) {
    for (double f : found)
      if (std::abs(f - t) <= 1e-8 * std::max(1.0, T)) return;
    found.push_back(t);
  };
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (D[i] == 0.0) {
      add(grid[i]);
    } else if (D[i - 1] != 0.0 && (D[i] < 0.0) != (D[i - 1] < 0.0)) {
      add(bisect_sign_change(flow, n, grid[i - 1], grid[i], D[i - 1], opts.tol));
    } else if (i + 1 < grid.size() && std::abs(D[i]) < std::abs(D[i - 1]) &&
               std::abs(D[i]) <= std::abs(D[i + 1]) && (D[i] < 0.0) == (D[i + 1] < 0.0)) {
      const auto [t, v] = minimize_abs(flow, n, grid[i - 1], grid[i + 1], opts.tol);
      if (v < opts.dip_tol) add(t);
    }
  }
  if (std::abs(D.back()) < opts.dip_tol) add(T);
  std::sort(found.begin(), found.end());
  return found;
}

SelfConjugacy is_self_conjugate(const SpacetimeModel& model, const LoopCandidate& loop, double tol,
                                double integrator_tol) {
  const int n = model.dim();
  const Mat D = dexp_matrix(model, loop.v, integrator_tol);
  const DeckElement deck = model.deck(loop.deck);
  const Mat M = deck.A.fullPivLu().solve(D);
  const Eigen::JacobiSVD<Mat> svd(M);
  const double smax = svd.singularValues()[0];
  SelfConjugacy out;
  out.det = D.determinant();
  out.normalized = smax > 0.0 ? std::abs(M.determinant()) / std::pow(smax, n) : 0.0;
  out.self_conjugate = out.normalized < tol;
  return out;
}

}  // namespace timeloop
