#pragma once

#include <cmath>
#include <limits>

#include "timeloop/errors.hpp"
#include "timeloop/loopspace.hpp"

namespace timeloop::detail {

struct Evaluation {
  Vec r;
  Mat J;  // empty when not requested
};

struct NewtonOutcome {
  Vec z;
  Vec r;
  double norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
  enum class Status { converged, budget, collapse, singular } status = Status::budget;
  double condition = 0.0;
};

/// Damped Newton with pseudo-inverse steps and backtracking on |r|.
template <class Eval>
NewtonOutcome damped_newton(const Vec& z0, const Eval& eval, const SolverOptions& o) {
  NewtonOutcome out;
  out.z = z0;
  Evaluation e = eval(out.z, true);
  out.r = e.r;
  out.norm = e.r.norm();
  for (;;) {
    if (out.norm < o.tol) {
      out.status = NewtonOutcome::Status::converged;
      return out;
    }
    if (out.iterations >= o.max_iter) {
      out.status = NewtonOutcome::Status::budget;
      return out;
    }
    const Eigen::JacobiSVD<Mat> svd(e.J, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    const double smax = sv.size() ? sv[0] : 0.0;
    const double smin = sv.size() ? sv[sv.size() - 1] : 0.0;
    out.condition = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
    if (out.condition > o.max_condition) {
      out.status = NewtonOutcome::Status::singular;
      return out;
    }
    auto pinv_step = [&](double cutoff) {
      Vec inv = Vec::Zero(sv.size());
      for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff * smax) inv[i] = 1.0 / sv[i];
      return Vec(-(svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose() * out.r));
    };
    // Residual norm at a trial point, infinity when integration fails there.
    auto trial_norm = [&](const Vec& trial) {
      try {
        const double tn = eval(trial, false).r.norm();
        return std::isfinite(tn) ? tn : std::numeric_limits<double>::infinity();
      } catch (const Error&) {
        return std::numeric_limits<double>::infinity();
      }
    };
    const Vec step = pinv_step(1e-14);

    ++out.iterations;
    Vec best = step;
    double best_norm = trial_norm(out.z + step);
    if (out.condition > 1e6) {
      // Near a family of solutions the residual component along the nearly
      // singular direction is second order; dropping that direction avoids
      // amplifying it.
      const Vec truncated = pinv_step(1e-6);
      const double tn = trial_norm(out.z + truncated);
      if (tn < best_norm) {
        best = truncated;
        best_norm = tn;
      }
    }
    bool accepted = best_norm < (1.0 - 1e-4) * out.norm;
    if (accepted) out.z += best;
    for (double alpha = 0.5; !accepted && alpha >= 1e-12; alpha *= 0.5) {
      if (trial_norm(out.z + alpha * step) < (1.0 - 1e-4 * alpha) * out.norm) {
        out.z += alpha * step;
        accepted = true;
      }
    }
    if (!accepted) {
      out.status = NewtonOutcome::Status::collapse;
      return out;
    }
    e = eval(out.z, true);
    out.r = e.r;
    out.norm = e.r.norm();
  }
}

}  // namespace timeloop::detail
