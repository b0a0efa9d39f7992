#pragma once

#include <string>

#include "timeloop/manifold.hpp"

namespace timeloop {

/// A timelike geodesic loop t -> exp_p(t v), t in [0, 1], whose endpoint is
/// the deck image of its base point.
struct LoopCandidate {
  TangentVec v;
  std::string deck = "identity";
  Vec residual;                // exp_p(v) - deck(p), wrapped on periodic coordinates
  double residual_norm = 0.0;  // chart-Euclidean
  double length = 0.0;         // |v|, the parameter span being 1
  double closure_defect = 0.0; // |gamma'(1) - d(deck)(v)|, chart-Euclidean
  Vec end_point;
  Vec end_velocity;
  bool converged = false;
  int iterations = 0;

  const Vec& base() const noexcept { return v.base; }
};

}  // namespace timeloop
