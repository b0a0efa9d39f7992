#include "timeloop/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "timeloop/random.hpp"

namespace timeloop {

const char* to_string(Causal c) {
  switch (c) {
    case Causal::timelike: return "timelike";
    case Causal::null: return "null";
    case Causal::spacelike: return "spacelike";
  }
  return "?";
}

const char* to_string(Orientation o) {
  switch (o) {
    case Orientation::future: return "future";
    case Orientation::past: return "past";
    case Orientation::none: return "none";
  }
  return "?";
}

// ---- Geometry defaults ---------------------------------------------------

Christoffel Geometry::christoffel(const Vec& p) const {
  // Fourth-order stencil: truncation and round-off both stay near 1e-13, so
  // tight adaptive integration does not chase differencing noise.
  constexpr double h = 1e-3;
  const int n = dim();
  std::vector<Mat> dg(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto at = [&](double s) {
      Vec q = p;
      q[k] += s * h;
      return metric(q);
    };
    dg[static_cast<std::size_t>(k)] = (8.0 * (at(1) - at(-1)) - (at(2) - at(-2))) / (12.0 * h);
  }
  const Mat ginv = metric(p).inverse();
  Christoffel gamma(n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      for (int c = b; c < n; ++c) {
        double s = 0.0;
        for (int d = 0; d < n; ++d) {
          const double lowered = dg[static_cast<std::size_t>(b)](d, c) +
                                 dg[static_cast<std::size_t>(c)](d, b) -
                                 dg[static_cast<std::size_t>(d)](b, c);
          s += 0.5 * ginv(a, d) * lowered;
        }
        gamma(a, b, c) = s;
        gamma(a, c, b) = s;
      }
  return gamma;
}

ChristoffelGradient Geometry::christoffel_gradient(const Vec& p) const {
  constexpr double h = 1e-3;
  const int n = dim();
  ChristoffelGradient grad(n);
  for (int d = 0; d < n; ++d) {
    auto at = [&](double s) {
      Vec q = p;
      q[d] += s * h;
      return christoffel(q);
    };
    const Christoffel g1 = at(1), gm1 = at(-1), g2 = at(2), gm2 = at(-2);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = 0; c < n; ++c)
          grad(a, b, c, d) = (8.0 * (g1(a, b, c) - gm1(a, b, c)) - (g2(a, b, c) - gm2(a, b, c))) / (12.0 * h);
  }
  return grad;
}

// ---- DeckElement ---------------------------------------------------------

DeckElement DeckElement::identity(int n) {
  return {"identity", Mat::Identity(n, n), Vec::Zero(n)};
}

bool DeckElement::is_identity() const {
  return A == Mat::Identity(A.rows(), A.cols()) && b.isZero(0.0);
}

bool DeckElement::is_translation() const { return A == Mat::Identity(A.rows(), A.cols()); }

DeckElement DeckElement::compose(const DeckElement& other) const {
  return {label + "*" + other.label, A * other.A, A * other.b + b};
}

DeckElement DeckElement::inverse() const {
  const Mat Ainv = A.inverse();
  return {label + "^-1", Ainv, -Ainv * b};
}

// ---- SpacetimeModel ------------------------------------------------------

SpacetimeModel::SpacetimeModel(std::string name, std::shared_ptr<const Geometry> geometry,
                               std::optional<DeckGroup> deck_group)
    : name_(std::move(name)), geometry_(std::move(geometry)), deck_group_(std::move(deck_group)) {
  if (!geometry_) throw ConfigError("model '" + name_ + "' has no geometry");
  if (geometry_->dim() < 2) throw ConfigError("chart dimension must be at least 2");
  if (deck_group_) {
    for (const auto& g : deck_group_->generators) {
      if (g.label.empty() || g.label == "identity")
        throw ConfigError("deck generators need a non-empty name other than 'identity'");
      if (g.A.rows() != dim() || g.A.cols() != dim() || g.b.size() != dim())
        throw ConfigError("deck generator '" + g.label + "' has the wrong dimension");
      if (std::abs(g.A.determinant()) < 1e-12)
        throw ConfigError("deck generator '" + g.label + "' is not invertible");
    }
    if (deck_group_->word_bound < 1) throw ConfigError("deck word bound must be >= 1");
  }
}

bool SpacetimeModel::contains(const Vec& p) const {
  return p.size() == dim() && geometry_->contains(p);
}

void SpacetimeModel::require_in_domain(const Vec& p) const {
  if (p.size() != dim()) {
    std::ostringstream os;
    os << "point has dimension " << p.size() << ", model '" << name_ << "' has " << dim();
    throw DomainError(os.str());
  }
  if (!geometry_->contains(p)) {
    std::ostringstream os;
    os << "point (" << p.transpose() << ") is outside the chart of '" << name_ << "'";
    throw DomainError(os.str());
  }
}

Mat SpacetimeModel::metric_at(const Vec& p) const {
  require_in_domain(p);
  return geometry_->metric(p);
}

Christoffel SpacetimeModel::christoffel_at(const Vec& p) const {
  require_in_domain(p);
  return geometry_->christoffel(p);
}

ChristoffelGradient SpacetimeModel::christoffel_gradient_at(const Vec& p) const {
  require_in_domain(p);
  return geometry_->christoffel_gradient(p);
}

Vec SpacetimeModel::time_orientation_at(const Vec& p) const {
  require_in_domain(p);
  return geometry_->time_orientation(p);
}

double SpacetimeModel::inner(const Vec& p, const Vec& a, const Vec& b) const {
  return a.dot(metric_at(p) * b);
}

CausalTag SpacetimeModel::classify(const TangentVec& v) const {
  const Mat g = metric_at(v.base);
  const double h2 = v.comp.squaredNorm();
  if (h2 == 0.0) return {Causal::spacelike, Orientation::none};
  const double q = v.comp.dot(g * v.comp);
  Causal c = Causal::spacelike;
  if (std::abs(q) <= kNullTolerance * h2)
    c = Causal::null;
  else if (q < 0.0)
    c = Causal::timelike;
  if (c == Causal::spacelike) return {c, Orientation::none};
  const double s = v.comp.dot(g * geometry_->time_orientation(v.base));
  return {c, s < 0.0 ? Orientation::future : Orientation::past};
}

double SpacetimeModel::norm(const TangentVec& v) const {
  return std::sqrt(std::abs(v.comp.dot(metric_at(v.base) * v.comp)));
}

bool SpacetimeModel::has_fundamental_domain() const {
  if (geometry_->periods().cwiseAbs().maxCoeff() > 0.0) return true;
  if (!deck_group_ || deck_group_->generators.empty()) return false;
  for (const auto& g : deck_group_->generators)
    if (!g.is_translation()) return false;
  return true;
}

namespace {

double wrap_centered(double x, double period) {
  return x - period * std::floor(x / period + 0.5);
}

}  // namespace

Vec SpacetimeModel::canonicalize(const Vec& p) const {
  if (!has_fundamental_domain())
    throw ConfigError("model '" + name_ + "' has no deck group with a fundamental-domain rule");
  require_in_domain(p);
  Vec out = p;
  const Vec periods = geometry_->periods();
  for (int i = 0; i < dim(); ++i)
    if (periods[i] > 0.0) out[i] = wrap_centered(out[i], periods[i]);
  if (deck_group_ && !deck_group_->generators.empty()) {
    const int m = static_cast<int>(deck_group_->generators.size());
    Mat B(dim(), m);
    for (int j = 0; j < m; ++j) B.col(j) = deck_group_->generators[static_cast<std::size_t>(j)].b;
    const Vec c = B.colPivHouseholderQr().solve(out);
    Vec k(m);
    // The shift keeps coordinates that round to just below an integer stable.
    for (int j = 0; j < m; ++j) k[j] = std::floor(c[j] + 1e-12);
    out -= B * k;
  }
  return out;
}

Vec SpacetimeModel::displacement(const Vec& from, const Vec& to) const {
  Vec d = to - from;
  const Vec periods = geometry_->periods();
  for (int i = 0; i < dim(); ++i)
    if (periods[i] > 0.0) d[i] = wrap_centered(d[i], periods[i]);
  return d;
}

namespace {

struct Letter {
  int gen;
  int sign;
};

std::string word_label(const std::vector<Letter>& word, const DeckGroup& group) {
  if (word.empty()) return "identity";
  std::string label;
  std::size_t i = 0;
  while (i < word.size()) {
    std::size_t j = i;
    int power = 0;
    while (j < word.size() && word[j].gen == word[i].gen && word[j].sign == word[i].sign) {
      power += word[j].sign;
      ++j;
    }
    if (!label.empty()) label += "*";
    label += group.generators[static_cast<std::size_t>(word[i].gen)].label;
    if (power != 1) label += "^" + std::to_string(power);
    i = j;
  }
  return label;
}

bool same_map(const DeckElement& a, const DeckElement& b) {
  return (a.A - b.A).cwiseAbs().maxCoeff() < 1e-12 && (a.b - b.b).cwiseAbs().maxCoeff() < 1e-12;
}

}  // namespace

DeckElement SpacetimeModel::deck(const std::string& label) const {
  if (label.empty() || label == "identity" || label == "e") return DeckElement::identity(dim());
  if (!deck_group_) throw ConfigError("model '" + name_ + "' has no deck group; unknown deck '" + label + "'");
  DeckElement result = DeckElement::identity(dim());
  std::size_t start = 0;
  while (start <= label.size()) {
    const std::size_t stop = std::min(label.find('*', start), label.size());
    const std::string token = label.substr(start, stop - start);
    std::string name = token;
    int power = 1;
    if (const auto caret = token.find('^'); caret != std::string::npos) {
      name = token.substr(0, caret);
      try {
        std::size_t used = 0;
        power = std::stoi(token.substr(caret + 1), &used);
        if (used != token.size() - caret - 1) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ConfigError("bad exponent in deck label '" + label + "'");
      }
    }
    const auto it = std::find_if(deck_group_->generators.begin(), deck_group_->generators.end(),
                                 [&](const DeckElement& g) { return g.label == name; });
    if (it == deck_group_->generators.end())
      throw ConfigError("unknown deck generator '" + name + "' in label '" + label + "'");
    const DeckElement step = power >= 0 ? *it : it->inverse();
    for (int k = 0; k < std::abs(power); ++k) result = result.compose(step);
    start = stop + 1;
  }
  result.label = label;
  return result;
}

std::vector<DeckElement> SpacetimeModel::loop_classes() const {
  std::vector<DeckElement> out;
  if (geometry_->periods().cwiseAbs().maxCoeff() > 0.0) out.push_back(DeckElement::identity(dim()));
  if (!deck_group_) return out;
  const auto& group = *deck_group_;
  const int m = static_cast<int>(group.generators.size());
  std::vector<std::vector<Letter>> frontier{{}};
  for (int len = 1; len <= group.word_bound; ++len) {
    std::vector<std::vector<Letter>> next;
    for (const auto& word : frontier)
      for (int gen = 0; gen < m; ++gen)
        for (int sign : {1, -1}) {
          if (!word.empty() && word.back().gen == gen && word.back().sign == -sign) continue;
          auto w = word;
          w.push_back({gen, sign});
          next.push_back(w);
        }
    for (const auto& word : next) {
      DeckElement el = deck(word_label(word, group));
      if (el.is_identity()) continue;
      const bool seen = std::any_of(out.begin(), out.end(),
                                    [&](const DeckElement& o) { return same_map(o, el); });
      if (!seen) out.push_back(std::move(el));
    }
    frontier = std::move(next);
  }
  return out;
}

// ---- validation ----------------------------------------------------------

void validate_model(const SpacetimeModel& model, int samples, double radius,
                    unsigned long long seed) {
  Rng rng(seed);
  const int n = model.dim();
  int accepted = 0;
  for (int attempt = 0; accepted < samples && attempt < 50 * samples; ++attempt) {
    const Vec p = rng.uniform_box(n, radius);
    if (!model.contains(p)) continue;
    ++accepted;
    const Mat g = model.metric_at(p);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw ConfigError("metric of '" + model.name() + "' is not symmetric");
    const Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (g + g.transpose()));
    int negative = 0;
    for (int i = 0; i < n; ++i) {
      const double lam = eig.eigenvalues()[i];
      if (std::abs(lam) < 1e-12 * scale)
        throw ConfigError("metric of '" + model.name() + "' is degenerate");
      if (lam < 0.0) ++negative;
    }
    if (negative != 1) {
      std::ostringstream os;
      os << "metric of '" << model.name() << "' has " << negative
         << " negative eigenvalues; Lorentzian signature (-,+,...,+) required";
      throw ConfigError(os.str());
    }
    const Vec T = model.time_orientation_at(p);
    if (T.dot(g * T) >= 0.0)
      throw ConfigError("time orientation of '" + model.name() + "' is not timelike");
    const Christoffel gamma = model.christoffel_at(p);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b)
        for (int c = b + 1; c < n; ++c)
          if (std::abs(gamma(a, b, c) - gamma(a, c, b)) > 1e-10)
            throw ConfigError("Christoffel symbols of '" + model.name() + "' are not symmetric");
    if (model.deck_group()) {
      for (const auto& gen : model.deck_group()->generators) {
        const Vec q = gen.apply(p);
        if (!model.contains(q)) continue;
        const Mat pulled = gen.A.transpose() * model.metric_at(q) * gen.A;
        if ((pulled - g).cwiseAbs().maxCoeff() > 1e-10 * scale)
          throw ConfigError("deck generator '" + gen.label + "' of '" + model.name() +
                            "' is not an isometry");
      }
    }
  }
  if (accepted == 0) throw ConfigError("no sample point of '" + model.name() + "' lies in its chart");
}

}  // namespace timeloop
