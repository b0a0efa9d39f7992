#pragma once

#include <functional>
#include <vector>

#include "timeloop/linalg.hpp"

namespace timeloop {

struct OdeOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  int max_steps = 200000;
  bool keep_dense = true;
};

/// Continuous solution of an ODE produced by the Dormand-Prince 5(4) pair;
/// each accepted step keeps the coefficients of its fourth-order interpolant.
class DenseTrajectory {
 public:
  struct Step {
    double t0;
    double h;
    Mat coeffs;  // dim x 5
  };

  DenseTrajectory() = default;
  DenseTrajectory(double t_begin, Vec y_begin) : t_begin_(t_begin), t_end_(t_begin) {
    nodes_.push_back(t_begin);
    states_.push_back(std::move(y_begin));
  }

  double t_begin() const noexcept { return t_begin_; }
  double t_end() const noexcept { return t_end_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  const std::vector<Vec>& states() const noexcept { return states_; }
  const Vec& final_state() const { return states_.back(); }
  bool has_dense() const noexcept { return !steps_.empty() || nodes_.size() == 1; }

  /// State at any parameter between t_begin and t_end.
  Vec at(double t) const;

  void push(double t_next, Vec y_next, Step step, bool keep_dense);

 private:
  double t_begin_ = 0.0;
  double t_end_ = 0.0;
  std::vector<double> nodes_;
  std::vector<Vec> states_;
  std::vector<Step> steps_;
};

using OdeRhs = std::function<void(double t, const Vec& y, Vec& dydt)>;
using StateCheck = std::function<bool(const Vec& y)>;

/// Integrates y' = f(t, y) from t0 to t1 (either direction). Throws
/// IntegrationError on step-size underflow, step budget exhaustion, or when
/// `valid` rejects an accepted state; the error carries the last valid t.
DenseTrajectory integrate_dopri5(const OdeRhs& f, double t0, const Vec& y0, double t1,
                                 const OdeOptions& options, const StateCheck& valid = {});

}  // namespace timeloop
