#include <cmath>
#include <numbers>

#include "timeloop/manifold.hpp"

namespace timeloop {
namespace {

class FlatGeometry final : public Geometry {
 public:
  FlatGeometry(Mat metric, Vec future) : metric_(std::move(metric)), future_(std::move(future)) {}

  int dim() const override { return static_cast<int>(metric_.rows()); }
  Mat metric(const Vec&) const override { return metric_; }
  Vec time_orientation(const Vec&) const override { return future_; }
  Christoffel christoffel(const Vec&) const override { return Christoffel(dim()); }
  ChristoffelGradient christoffel_gradient(const Vec&) const override {
    return ChristoffelGradient(dim());
  }
  bool has_analytic_christoffel() const override { return true; }
  bool is_flat() const override { return true; }

 private:
  Mat metric_;
  Vec future_;
};

/// Omega(x)^2 (-dt^2 + dx^2). With phi = log Omega the only non-zero symbols
/// are Gamma^t_{tx} = Gamma^t_{xt} = Gamma^x_{tt} = Gamma^x_{xx} = phi'(x).
class WarpedCylinderGeometry final : public Geometry {
 public:
  WarpedCylinderGeometry(WarpProfile profile, double eps, bool analytic)
      : profile_(profile), eps_(eps), analytic_(analytic) {}

  int dim() const override { return 2; }

  bool contains(const Vec& p) const override {
    return p.size() == 2 && p.allFinite() && omega(p[1]) > 0.0 && std::isfinite(omega(p[1]));
  }

  Mat metric(const Vec& p) const override {
    const double w2 = omega(p[1]) * omega(p[1]);
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = -w2;
    g(1, 1) = w2;
    return g;
  }

  Vec time_orientation(const Vec&) const override { return Vec::Unit(2, 0); }

  Christoffel christoffel(const Vec& p) const override {
    if (!analytic_) return Geometry::christoffel(p);
    const double d = dlog_omega(p[1]);
    Christoffel gamma(2);
    gamma(0, 0, 1) = d;
    gamma(0, 1, 0) = d;
    gamma(1, 0, 0) = d;
    gamma(1, 1, 1) = d;
    return gamma;
  }

  ChristoffelGradient christoffel_gradient(const Vec& p) const override {
    if (!analytic_) return Geometry::christoffel_gradient(p);
    const double dd = d2log_omega(p[1]);
    ChristoffelGradient grad(2);
    grad(0, 0, 1, 1) = dd;
    grad(0, 1, 0, 1) = dd;
    grad(1, 0, 0, 1) = dd;
    grad(1, 1, 1, 1) = dd;
    return grad;
  }

  bool has_analytic_christoffel() const override { return analytic_; }

 private:
  double omega(double x) const {
    switch (profile_) {
      case WarpProfile::cosh: return std::cosh(x);
      case WarpProfile::one_plus_eps_x2: return 1.0 + eps_ * x * x;
    }
    return 1.0;
  }
  double dlog_omega(double x) const {
    switch (profile_) {
      case WarpProfile::cosh: return std::tanh(x);
      case WarpProfile::one_plus_eps_x2: return 2.0 * eps_ * x / (1.0 + eps_ * x * x);
    }
    return 0.0;
  }
  double d2log_omega(double x) const {
    switch (profile_) {
      case WarpProfile::cosh: {
        const double c = std::cosh(x);
        return 1.0 / (c * c);
      }
      case WarpProfile::one_plus_eps_x2: {
        const double w = 1.0 + eps_ * x * x;
        return 2.0 * eps_ * (1.0 - eps_ * x * x) / (w * w);
      }
    }
    return 0.0;
  }

  WarpProfile profile_;
  double eps_;
  bool analytic_;
};

class AdS2Geometry final : public Geometry {
 public:
  int dim() const override { return 2; }

  bool contains(const Vec& p) const override {
    return p.size() == 2 && p.allFinite() && std::abs(p[1]) <= ads2_chart::kMaxAbsS;
  }

  Mat metric(const Vec& p) const override {
    const double c = std::cosh(p[1]);
    Mat g = Mat::Zero(2, 2);
    g(0, 0) = -c * c;
    g(1, 1) = 1.0;
    return g;
  }

  Vec time_orientation(const Vec&) const override { return Vec::Unit(2, 0); }

  Christoffel christoffel(const Vec& p) const override {
    const double s = p[1];
    Christoffel gamma(2);
    gamma(1, 0, 0) = std::sinh(s) * std::cosh(s);
    gamma(0, 0, 1) = std::tanh(s);
    gamma(0, 1, 0) = std::tanh(s);
    return gamma;
  }

  ChristoffelGradient christoffel_gradient(const Vec& p) const override {
    const double s = p[1];
    const double sech2 = 1.0 / (std::cosh(s) * std::cosh(s));
    ChristoffelGradient grad(2);
    grad(1, 0, 0, 1) = std::cosh(2.0 * s);
    grad(0, 0, 1, 1) = sech2;
    grad(0, 1, 0, 1) = sech2;
    return grad;
  }

  bool has_analytic_christoffel() const override { return true; }

  Vec periods() const override {
    Vec p = Vec::Zero(2);
    p[0] = 2.0 * std::numbers::pi;
    return p;
  }
};

Mat minkowski_metric(int n) {
  Mat g = Mat::Identity(n, n);
  g(0, 0) = -1.0;
  return g;
}

/// Eigenvector of the negative eigenvalue, signed so its largest entry is positive.
Vec default_future(const Mat& g) {
  const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (g + g.transpose()));
  Vec v = eig.eigenvectors().col(0);
  Eigen::Index idx = 0;
  v.cwiseAbs().maxCoeff(&idx);
  if (v[idx] < 0.0) v = -v;
  return v;
}

DeckElement translation(std::string label, Vec b) {
  const auto n = b.size();
  return {std::move(label), Mat::Identity(n, n), std::move(b)};
}

}  // namespace

SpacetimeModel minkowski(int n) {
  if (n < 2) throw ConfigError("minkowski dimension must be at least 2");
  const Mat g = minkowski_metric(n);
  const std::string name = n == 2 ? "minkowski2" : "minkowski" + std::to_string(n);
  return SpacetimeModel(name, std::make_shared<FlatGeometry>(g, Vec::Unit(n, 0)));
}

SpacetimeModel cylinder(double period) {
  if (!(period > 0.0)) throw ConfigError("cylinder period must be positive");
  const Mat g = minkowski_metric(2);
  DeckGroup group{{translation("T", Vec::Unit(2, 0) * period)}, 2};
  return SpacetimeModel("cylinder", std::make_shared<FlatGeometry>(g, Vec::Unit(2, 0)), group);
}

SpacetimeModel warped_cylinder(WarpProfile profile, double eps, double period, bool analytic) {
  if (!(period > 0.0)) throw ConfigError("warped cylinder period must be positive");
  DeckGroup group{{translation("T", Vec::Unit(2, 0) * period)}, 2};
  return SpacetimeModel("warped_cylinder",
                        std::make_shared<WarpedCylinderGeometry>(profile, eps, analytic), group);
}

SpacetimeModel ads2() { return SpacetimeModel("ads2", std::make_shared<AdS2Geometry>()); }

SpacetimeModel flat_quotient(const Mat& metric, std::vector<DeckElement> generators,
                             int word_bound, std::string name) {
  if (metric.rows() != metric.cols() || metric.rows() < 2)
    throw ConfigError("flat_quotient metric must be a square matrix of size >= 2");
  auto geometry = std::make_shared<FlatGeometry>(metric, default_future(metric));
  std::optional<DeckGroup> group;
  if (!generators.empty()) group = DeckGroup{std::move(generators), word_bound};
  return SpacetimeModel(std::move(name), std::move(geometry), std::move(group));
}

namespace ads2_chart {

Eigen::Vector3d embed(const Vec& c) {
  const double ch = std::cosh(c[1]);
  return {ch * std::cos(c[0]), ch * std::sin(c[0]), std::sinh(c[1])};
}

Vec chart_of(const Eigen::Vector3d& x) {
  Vec c(2);
  c[0] = std::atan2(x[1], x[0]);
  c[1] = std::asinh(x[2]);
  return c;
}

Eigen::Vector3d push(const Vec& c, const Vec& v) {
  const double th = c[0], s = c[1];
  const Eigen::Vector3d d_theta{-std::cosh(s) * std::sin(th), std::cosh(s) * std::cos(th), 0.0};
  const Eigen::Vector3d d_s{std::sinh(s) * std::cos(th), std::sinh(s) * std::sin(th), std::cosh(s)};
  return v[0] * d_theta + v[1] * d_s;
}

}  // namespace ads2_chart

}  // namespace timeloop
