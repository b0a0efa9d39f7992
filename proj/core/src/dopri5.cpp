#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "timeloop/errors.hpp"
#include "timeloop/ode.hpp"

namespace timeloop {
namespace {

// Dormand & Prince (1980) coefficients with Hairer's dense-output extension.
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0, c5 = 8.0 / 9.0;
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0, a53 = 64448.0 / 6561.0,
                 a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0, a63 = 46732.0 / 5247.0,
                 a64 = 49.0 / 176.0, a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

double scaled_norm(const Vec& e, const Vec& y0, const Vec& y1, const OdeOptions& o) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double sk = o.atol + o.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    s += (e[i] / sk) * (e[i] / sk);
  }
  return std::sqrt(s / static_cast<double>(e.size()));
}

double initial_step(const OdeRhs& f, double t0, const Vec& y0, const Vec& f0, double span,
                    const OdeOptions& o) {
  const double d0 = scaled_norm(y0, y0, y0, o);
  const double d1n = scaled_norm(f0, y0, y0, o);
  double h0 = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
  h0 = std::min(h0, span);
  Vec y1 = y0 + h0 * f0;
  Vec f1(y0.size());
  f(t0 + h0, y1, f1);
  double d2 = scaled_norm(f1 - f0, y0, y0, o) / h0;
  if (!std::isfinite(d2)) d2 = 1e10;
  const double dm = std::max(d1n, d2);
  const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 1.0 / 5.0);
  return std::min({100.0 * h0, h1, span});
}

}  // namespace

Vec DenseTrajectory::at(double t) const {
  if (nodes_.size() == 1) return states_.front();
  const bool forward = t_end_ >= t_begin_;
  const double lo = std::min(t_begin_, t_end_), hi = std::max(t_begin_, t_end_);
  const double slack = 1e-12 * std::max(1.0, std::abs(hi - lo));
  if (t < lo - slack || t > hi + slack) {
    std::ostringstream os;
    os << "dense output requested at t=" << t << " outside [" << lo << ", " << hi << "]";
    throw std::out_of_range(os.str());
  }
  if (steps_.empty()) {
    if (t == nodes_.back()) return states_.back();
    throw std::logic_error("trajectory was integrated without dense output");
  }
  // Locate the step containing t.
  auto it = forward ? std::upper_bound(nodes_.begin(), nodes_.end(), t)
                    : std::upper_bound(nodes_.begin(), nodes_.end(), t, std::greater<>());
  std::size_t idx = static_cast<std::size_t>(std::distance(nodes_.begin(), it));
  idx = idx == 0 ? 0 : idx - 1;
  idx = std::min(idx, steps_.size() - 1);
  const Step& s = steps_[idx];
  const double theta = (t - s.t0) / s.h;
  const double theta1 = 1.0 - theta;
  return s.coeffs.col(0) +
         theta * (s.coeffs.col(1) +
                  theta1 * (s.coeffs.col(2) + theta * (s.coeffs.col(3) + theta1 * s.coeffs.col(4))));
}

void DenseTrajectory::push(double t_next, Vec y_next, Step step, bool keep_dense) {
  nodes_.push_back(t_next);
  states_.push_back(std::move(y_next));
  if (keep_dense) steps_.push_back(std::move(step));
  t_end_ = t_next;
}

DenseTrajectory integrate_dopri5(const OdeRhs& f, double t0, const Vec& y0, double t1,
                                 const OdeOptions& o, const StateCheck& valid) {
  DenseTrajectory traj(t0, y0);
  if (t1 == t0) return traj;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);
  const Eigen::Index n = y0.size();

  Vec k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), y1(n), err(n);
  Vec y = y0;
  double t = t0;
  f(t, y, k1);
  if (!k1.allFinite()) throw IntegrationError("right-hand side is not finite at the initial state", t0);

  // The step-size heuristic works on a forward-time copy of the problem.
  const OdeRhs forward = [&](double s, const Vec& z, Vec& dz) {
    f(t0 + dir * (s - t0), z, dz);
    dz *= dir;
  };
  double h = initial_step(forward, t0, y0, dir * k1, span, o);
  bool rejected = false;
  bool nonfinite = false;  // last rejection came from leaving the right-hand side's domain
  int steps = 0;

  while (dir * (t1 - t) > 0.0) {
    if (++steps > o.max_steps)
      throw IntegrationError("step budget exhausted", t);
    const double remaining = std::abs(t1 - t);
    if (h < 1e-14 * std::max(1.0, std::abs(t))) {
      if (nonfinite) throw IntegrationError("trajectory reached the chart boundary", t, true);
      throw IntegrationError("step size underflow", t);
    }
    bool last = false;
    double hs = h;
    if (hs >= remaining * (1.0 - 1e-13)) {
      hs = remaining;
      last = true;
    }
    const double hd = dir * hs;

    ytmp = y + hd * a21 * k1;
    f(t + c2 * hd, ytmp, k2);
    ytmp = y + hd * (a31 * k1 + a32 * k2);
    f(t + c3 * hd, ytmp, k3);
    ytmp = y + hd * (a41 * k1 + a42 * k2 + a43 * k3);
    f(t + c4 * hd, ytmp, k4);
    ytmp = y + hd * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    f(t + c5 * hd, ytmp, k5);
    ytmp = y + hd * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    f(t + hd, ytmp, k6);
    y1 = y + hd * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + hd, y1, k7);
    err = hd * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double en = scaled_norm(err, y, y1, o);
    nonfinite = !std::isfinite(en) || !y1.allFinite() || !k7.allFinite();
    if (nonfinite) en = std::numeric_limits<double>::infinity();

    if (en <= 1.0) {
      if (valid && !valid(y1)) throw IntegrationError("trajectory left the chart", t, true);
      DenseTrajectory::Step step;
      if (o.keep_dense) {
        step.t0 = t;
        step.h = hd;
        step.coeffs.resize(n, 5);
        const Vec ydiff = y1 - y;
        const Vec bspl = hd * k1 - ydiff;
        step.coeffs.col(0) = y;
        step.coeffs.col(1) = ydiff;
        step.coeffs.col(2) = bspl;
        step.coeffs.col(3) = ydiff - hd * k7 - bspl;
        step.coeffs.col(4) = hd * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      }
      t = last ? t1 : t + hd;
      y = y1;
      k1 = k7;
      traj.push(t, y, std::move(step), o.keep_dense);
      double fac = en == 0.0 ? 5.0 : 0.9 * std::pow(en, -0.2);
      fac = std::clamp(fac, 0.2, 5.0);
      if (rejected) fac = std::min(fac, 1.0);
      h = hs * fac;
      rejected = false;
    } else {
      const double fac = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2;
      h = hs * fac;
      rejected = true;
    }
  }
  return traj;
}

}  // namespace timeloop
