#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "timeloop/errors.hpp"
#include "timeloop/linalg.hpp"

namespace timeloop {

/// Half-width of the band around the light cone treated as null, relative
/// to the squared chart-Euclidean norm of the vector.
inline constexpr double kNullTolerance = 1e-10;

enum class Causal { timelike, null, spacelike };
enum class Orientation { future, past, none };

struct CausalTag {
  Causal character;
  Orientation orientation;

  bool causal() const noexcept { return character != Causal::spacelike; }
  friend bool operator==(const CausalTag&, const CausalTag&) = default;
};

const char* to_string(Causal c);
const char* to_string(Orientation o);

/// A tangent vector: chart coordinates of its base point plus components.
struct TangentVec {
  Vec base;
  Vec comp;

  TangentVec() = default;
  TangentVec(Vec b, Vec c) : base(std::move(b)), comp(std::move(c)) {}

  int dim() const noexcept { return static_cast<int>(base.size()); }
  bool finite() const { return base.allFinite() && comp.allFinite(); }
  TangentVec scaled(double c) const { return {base, c * comp}; }
};

/// Metric data of a single chart. Implementations are immutable.
class Geometry {
 public:
  virtual ~Geometry() = default;

  virtual int dim() const = 0;
  virtual bool contains(const Vec& p) const { return p.allFinite(); }
  virtual Mat metric(const Vec& p) const = 0;
  virtual Vec time_orientation(const Vec& p) const = 0;

  /// Defaults to central differences of the metric with step 1e-6.
  virtual Christoffel christoffel(const Vec& p) const;
  /// Defaults to central differences of christoffel() with step 1e-5.
  virtual ChristoffelGradient christoffel_gradient(const Vec& p) const;

  virtual bool has_analytic_christoffel() const { return false; }
  virtual bool is_flat() const { return false; }

  /// Period of each chart coordinate, 0 where the coordinate does not wrap.
  virtual Vec periods() const { return Vec::Zero(dim()); }
};

/// Deck transformation acting affinely on the covering chart, x -> A x + b.
struct DeckElement {
  std::string label;
  Mat A;
  Vec b;

  static DeckElement identity(int n);

  Vec apply(const Vec& x) const { return A * x + b; }
  Vec push(const Vec& v) const { return A * v; }
  bool is_identity() const;
  bool is_translation() const;

  /// (this * other)(x) = this(other(x)).
  DeckElement compose(const DeckElement& other) const;
  DeckElement inverse() const;
};

struct DeckGroup {
  std::vector<DeckElement> generators;  // labels are the generator names
  int word_bound = 2;
};

/// A chart-based Lorentzian manifold, optionally a quotient by a deck group.
/// Cheap to copy; the geometry is shared and immutable.
class SpacetimeModel {
 public:
  SpacetimeModel(std::string name, std::shared_ptr<const Geometry> geometry,
                 std::optional<DeckGroup> deck_group = std::nullopt);

  const std::string& name() const noexcept { return name_; }
  int dim() const noexcept { return geometry_->dim(); }
  const Geometry& geometry() const noexcept { return *geometry_; }

  bool contains(const Vec& p) const;
  /// Throws DomainError when p is outside the chart.
  void require_in_domain(const Vec& p) const;

  Mat metric_at(const Vec& p) const;
  Christoffel christoffel_at(const Vec& p) const;
  ChristoffelGradient christoffel_gradient_at(const Vec& p) const;
  Vec time_orientation_at(const Vec& p) const;

  double inner(const Vec& p, const Vec& a, const Vec& b) const;
  CausalTag classify(const TangentVec& v) const;
  double norm(const TangentVec& v) const;

  bool has_deck_group() const noexcept { return deck_group_.has_value(); }
  const std::optional<DeckGroup>& deck_group() const noexcept { return deck_group_; }
  bool has_fundamental_domain() const;

  /// Representative of p's orbit in the fundamental domain; idempotent.
  Vec canonicalize(const Vec& p) const;
  /// to - from in chart coordinates, wrapped on periodic coordinates.
  Vec displacement(const Vec& from, const Vec& to) const;

  /// Resolves "identity", a generator name, or a word such as "a*b^-1" / "T^2".
  DeckElement deck(const std::string& label) const;
  /// Non-identity group words up to the configured word-length bound, plus
  /// the identity class when the chart has a periodic coordinate.
  std::vector<DeckElement> loop_classes() const;

 private:
  std::string name_;
  std::shared_ptr<const Geometry> geometry_;
  std::optional<DeckGroup> deck_group_;
};

// ---- built-in catalogue --------------------------------------------------

enum class WarpProfile { cosh, one_plus_eps_x2 };

/// Minkowski space R^n_1 with metric diag(-1, 1, ..., 1).
SpacetimeModel minkowski(int n = 2);
/// R^2_1 modulo (t, x) ~ (t + period, x), deck generator "T".
SpacetimeModel cylinder(double period = 1.0);
/// Omega(x)^2 (-dt^2 + dx^2) modulo t ~ t + period, deck generator "T".
/// With analytic=false the Christoffel symbols fall back to finite differences.
SpacetimeModel warped_cylinder(WarpProfile profile = WarpProfile::cosh, double eps = 0.0,
                               double period = 1.0, bool analytic = true);
/// Two-dimensional anti-de Sitter hyperboloid x^2 + y^2 - z^2 = 1 in the
/// chart (theta, s) -> (cosh s cos theta, cosh s sin theta, sinh s), where
/// the metric reads -cosh^2 s dtheta^2 + ds^2 and theta has period 2 pi.
SpacetimeModel ads2();
/// Constant metric on R^n (Lorentzian signature required) modulo the group
/// generated by affine isometries.
SpacetimeModel flat_quotient(const Mat& metric, std::vector<DeckElement> generators,
                             int word_bound = 2, std::string name = "flat_quotient");

/// Embedding helpers for the ads2 chart.
namespace ads2_chart {
inline constexpr double kMaxAbsS = 30.0;
Eigen::Vector3d embed(const Vec& chart);
Vec chart_of(const Eigen::Vector3d& x);
/// Push a chart vector at `chart` into R^3.
Eigen::Vector3d push(const Vec& chart, const Vec& v);
}  // namespace ads2_chart

/// Checks metric symmetry, Lorentzian signature, timelike time orientation,
/// lower-index symmetry of the Christoffel symbols, and the isometry property
/// of every deck generator at `samples` deterministic points drawn from
/// [-radius, radius]^n. Throws ConfigError describing the first failure.
void validate_model(const SpacetimeModel& model, int samples = 8, double radius = 1.0,
                    unsigned long long seed = 0x5eedULL);

}  // namespace timeloop
