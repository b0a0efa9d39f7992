#include "timeloop/geodesic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace timeloop {
namespace {

void check_tolerance(double tol) {
  if (!(tol >= 1e-14 && tol <= 1e-3)) {
    std::ostringstream os;
    os << "integration tolerance " << tol << " outside [1e-14, 1e-3]";
    throw ConfigError(os.str());
  }
}

/// Right-hand side of the geodesic flow augmented with m variational columns.
struct AugmentedFlow {
  const Geometry* geometry;
  int n;
  int m;

  void operator()(double, const Vec& y, Vec& dy) const {
    dy.resize(y.size());
    const Vec x = y.head(n);
    if (!geometry->contains(x)) {
      dy.setConstant(std::numeric_limits<double>::quiet_NaN());
      return;
    }
    const Vec u = y.segment(n, n);
    const Christoffel gamma = geometry->christoffel(x);
    dy.head(n) = u;
    dy.segment(n, n) = -gamma.contract(u, u);
    if (m == 0) return;
    const ChristoffelGradient grad = geometry->christoffel_gradient(x);
    // dGamma(u,u)_a^d = d_d Gamma^a_{bc} u^b u^c
    Mat curv = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) {
          const double uu = u[b] * u[c];
          if (uu == 0.0) continue;
          for (int d = 0; d < n; ++d) curv(a, d) += grad(a, b, c, d) * uu;
        }
    // 2 Gamma^a_{bc} u^b as a matrix acting on du^c.
    Mat gu = Mat::Zero(n, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c) gu(a, c) += 2.0 * gamma(a, b, c) * u[b];
    for (int k = 0; k < m; ++k) {
      const Eigen::Index off = 2 * n + 2 * n * k;
      const Vec dx = y.segment(off, n);
      const Vec du = y.segment(off + n, n);
      dy.segment(off, n) = du;
      dy.segment(off + n, n) = -curv * dx - gu * du;
    }
  }
};

DenseTrajectory run_flow(const SpacetimeModel& model, const TangentVec& v, double T, const Mat& seeds,
                         double tol, bool keep_dense) {
  check_tolerance(tol);
  const int n = model.dim();
  if (v.base.size() != n || v.comp.size() != n)
    throw ConfigError("tangent vector dimension does not match the model");
  if (!v.finite()) throw DomainError("tangent vector has non-finite entries");
  model.require_in_domain(v.base);
  if (!std::isfinite(T)) throw ConfigError("integration span must be finite");
  const int m = static_cast<int>(seeds.cols());
  Vec y0(2 * n + 2 * n * m);
  y0.head(n) = v.base;
  y0.segment(n, n) = v.comp;
  for (int k = 0; k < m; ++k) y0.segment(2 * n + 2 * n * k, 2 * n) = seeds.col(k);

  const AugmentedFlow flow{&model.geometry(), n, m};
  OdeOptions opts;
  opts.rtol = tol;
  opts.atol = tol;
  opts.keep_dense = keep_dense;
  const Geometry* g = &model.geometry();
  return integrate_dopri5(flow, 0.0, y0, T, opts,
                          [g, n](const Vec& y) { return g->contains(y.head(n)); });
}

// 8-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 8> kGlNodes{-0.9602898564975363, -0.7966664774136267,
                                         -0.5255324099163290, -0.1834346424956498,
                                         0.1834346424956498,  0.5255324099163290,
                                         0.7966664774136267,  0.9602898564975363};
constexpr std::array<double, 8> kGlWeights{0.1012285362903763, 0.2223810344533745,
                                           0.3137066458778873, 0.3626837833783620,
                                           0.3626837833783620, 0.3137066458778873,
                                           0.2223810344533745, 0.1012285362903763};

}  // namespace

GeodesicSegment::GeodesicSegment(SpacetimeModel model, TangentVec initial, double T, double tol,
                                 DenseTrajectory trajectory)
    : model_(std::move(model)),
      initial_(std::move(initial)),
      T_(T),
      tol_(tol),
      trajectory_(std::move(trajectory)),
      character_(model_.classify(initial_)),
      length_(character_.character == Causal::timelike ? model_.norm(initial_) * std::abs(T) : 0.0) {}

Vec GeodesicSegment::point(double t) const { return trajectory_.at(t).head(model_.dim()); }

Vec GeodesicSegment::velocity(double t) const {
  return trajectory_.at(t).segment(model_.dim(), model_.dim());
}

Vec GeodesicSegment::end_point() const { return trajectory_.final_state().head(model_.dim()); }

Vec GeodesicSegment::end_velocity() const {
  return trajectory_.final_state().segment(model_.dim(), model_.dim());
}

double GeodesicSegment::energy_drift() const {
  const int n = model_.dim();
  const double e0 = model_.inner(initial_.base, initial_.comp, initial_.comp);
  double worst = 0.0;
  for (const Vec& y : trajectory_.states()) {
    const Vec x = y.head(n), u = y.segment(n, n);
    worst = std::max(worst, std::abs(model_.inner(x, u, u) - e0));
  }
  return worst;
}

GeodesicSegment integrate_geodesic(const SpacetimeModel& model, const TangentVec& v, double T,
                                   double tol) {
  if (!(T > 0.0)) throw ConfigError("geodesic parameter span T must be positive");
  DenseTrajectory traj = run_flow(model, v, T, Mat(2 * model.dim(), 0), tol, true);
  return GeodesicSegment(model, v, T, tol, std::move(traj));
}

Vec exp_map(const SpacetimeModel& model, const TangentVec& v, double tol) {
  const DenseTrajectory traj = run_flow(model, v, 1.0, Mat(2 * model.dim(), 0), tol, false);
  return traj.final_state().head(model.dim());
}

double length(const GeodesicSegment& seg) {
  const auto& nodes = seg.nodes();
  const SpacetimeModel& model = seg.model();
  if (seg.character().character == Causal::null) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double a = nodes[i], b = nodes[i + 1];
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t k = 0; k < kGlNodes.size(); ++k) {
      const double t = mid + half * kGlNodes[k];
      const Vec x = seg.point(t), u = seg.velocity(t);
      total += kGlWeights[k] * half * std::sqrt(std::abs(model.inner(x, u, u)));
    }
  }
  return total;
}

std::vector<TrajectorySample> sample_uniform(const GeodesicSegment& seg, int count) {
  if (count < 2) throw ConfigError("trajectory sampling needs at least 2 points");
  std::vector<TrajectorySample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double t = i == count - 1 ? seg.T() : seg.T() * i / (count - 1);
    out.push_back({t, seg.point(t), seg.velocity(t)});
  }
  return out;
}

FlowVariations unpack_flow_state(const Vec& y, int n, int m) {
  FlowVariations out;
  out.x = y.head(n);
  out.u = y.segment(n, n);
  out.dx.resize(n, m);
  out.du.resize(n, m);
  for (int k = 0; k < m; ++k) {
    out.dx.col(k) = y.segment(2 * n + 2 * n * k, n);
    out.du.col(k) = y.segment(2 * n + 2 * n * k + n, n);
  }
  return out;
}

FlowVariations flow_variations(const SpacetimeModel& model, const TangentVec& v, double T,
                               const Mat& seeds, double tol, DenseTrajectory* trajectory) {
  if (seeds.rows() != 2 * model.dim()) throw ConfigError("variation seeds must have 2n rows");
  DenseTrajectory traj = run_flow(model, v, T, seeds, tol, trajectory != nullptr);
  FlowVariations out = unpack_flow_state(traj.final_state(), model.dim(), static_cast<int>(seeds.cols()));
  if (trajectory) *trajectory = std::move(traj);
  return out;
}

}  // namespace timeloop
