// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "timeloop/cli/app.hpp"
#include "timeloop/timeloop.hpp"

using namespace timeloop;
using std::numbers::pi;

namespace {

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects failed conditions with a short reason each.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass_ = false;
      if (!failures_.empty()) failures_ += "; ";
      failures_ += what;
    }
  }
  void note(const std::string& s) {
    if (!notes_.empty()) notes_ += ", ";
    notes_ += s;
  }
  Outcome done() const { return {pass_, pass_ ? notes_ : failures_ + " [" + notes_ + "]"}; }

 private:
  bool pass_ = true;
  std::string failures_, notes_;
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

struct Criterion {
  std::string title;
  double budget_s;  // 0 means no runtime limit
  std::function<Outcome()> run;
};

// ---- 1 -----------------------------------------------------------------------

Outcome cylinder_class() {
  Checker c;
  const LoopCandidate loop = find_loop(cylinder(), {v2(0, 0), v2(1, 0)}, "T");
  const ClassBounds b = class_length_bounds(cylinder(), loop);
  c.expect(loop.converged, "loop did not converge");
  c.expect(std::abs(b.l_est - 1.0) < 1e-9, "l_est = " + fmt("%.12g", b.l_est));
  c.expect(std::abs(b.L_est - 1.0) < 1e-9, "L_est = " + fmt("%.12g", b.L_est));
  c.note("l_est " + fmt("%.12g", b.l_est) + ", L_est " + fmt("%.12g", b.L_est));
  return c.done();
}

// ---- 2 -----------------------------------------------------------------------

Outcome ads_class() {
  Checker c;
  const LoopCandidate loop = find_loop(ads2(), {v2(0, 0), v2(1.05 * 2 * pi, 1e-2)}, "identity");
  c.expect(loop.converged, "start loop did not converge");
  c.expect(std::abs(loop.length - 2 * pi) < 1e-6, "start length " + fmt("%.12g", loop.length));
  ContinuationOptions opts;
  opts.steps = 16;
  const HomotopyPath path = continuation_path(ads2(), loop, v2(1.0, 0.8), opts);
  c.expect(path.complete, "continuation stopped: " + path.event);
  c.expect(path.nodes.size() == 17, "node count " + std::to_string(path.nodes.size()));
  double worst = 0.0;
  for (const LoopCandidate& n : path.nodes) worst = std::max(worst, std::abs(n.length - 2 * pi));
  c.expect(worst < 1e-5, "max |length - 2 pi| " + fmt("%.3g", worst));
  c.note("start error " + fmt("%.2g", std::abs(loop.length - 2 * pi)) + ", path error " + fmt("%.2g", worst));
  return c.done();
}

// ---- 3 -----------------------------------------------------------------------

Outcome flat_no_conjugate_points() {
  Checker c;
  Rng rng(301);
  int found = 0, nulls = 0;
  for (int i = 0; i < 50; ++i) {
    const SpacetimeModel m = i % 2 ? cylinder() : minkowski(2);
    Vec v = rng.uniform_box(2, 2.0);
    if (i % 5 == 0) {
      v[0] = std::abs(v[1]);  // null
      ++nulls;
    } else {
      v[0] = std::abs(v[1]) + std::abs(rng.uniform()) + 0.05;
    }
    const TangentVec tv{rng.uniform_box(2, 3.0), v};
    if (!m.classify(tv).causal() || m.classify(tv).orientation != Orientation::future) {
      c.expect(false, "sample " + std::to_string(i) + " not future causal");
      continue;
    }
    const GeodesicSegment seg = integrate_geodesic(m, tv, 10.0);
    found += static_cast<int>(conjugate_points(m, seg).size());
  }
  c.expect(found == 0, std::to_string(found) + " conjugate points reported");
  c.note("50 geodesics, " + std::to_string(nulls) + " null");
  return c.done();
}

// ---- 4 -----------------------------------------------------------------------

Outcome ads_conjugate_points() {
  Checker c;
  const SpacetimeModel m = ads2();
  const GeodesicSegment seg = integrate_geodesic(m, {v2(0, 0), v2(1, 0)}, 2 * pi, 1e-12);
  const std::vector<double> got = conjugate_points(m, seg);
  const std::vector<double> ref = oracle::ads_circle_conjugate_points(2 * pi);
  c.expect(got.size() == ref.size(), "found " + std::to_string(got.size()) + " points");
  for (std::size_t i = 0; i < std::min(got.size(), ref.size()); ++i) {
    c.expect(std::abs(got[i] - ref[i]) < 1e-4, "point " + fmt("%.10g", got[i]));
    c.note(fmt("%.10g", got[i]));
  }
  return c.done();
}

// ---- 5 -----------------------------------------------------------------------

Outcome gauss_lemma() {
  Checker c;
  const SpacetimeModel cosh = warped_cylinder();
  const SpacetimeModel quad = warped_cylinder(WarpProfile::one_plus_eps_x2, 0.3);
  const SpacetimeModel numeric = warped_cylinder(WarpProfile::cosh, 0.0, 1.0, false);
  Mat eta = Mat::Identity(2, 2);
  eta(0, 0) = -1.0;
  const SpacetimeModel tilted = flat_quotient(eta, {{"a", Mat::Identity(2, 2), v2(2, 1)}});
  std::vector<std::pair<SpacetimeModel, LoopCandidate>> loops;
  Rng rng(501);
  for (int i = 0; i < 5; ++i) {
    const double x = rng.uniform(-0.6, 0.6), t = rng.uniform(-1.0, 1.0);
    loops.emplace_back(cosh, find_loop(cosh, {v2(t, x), v2(1.05, 0.0)}, "T"));
    loops.emplace_back(quad, find_loop(quad, {v2(t, x), v2(1.05, 0.0)}, "T"));
    loops.emplace_back(numeric, find_loop(numeric, {v2(t, x), v2(1.05, 0.0)}, "T"));
  }
  loops.emplace_back(cylinder(), find_loop(cylinder(), {v2(0.2, 0.1), v2(1, 0)}, "T"));
  loops.emplace_back(tilted, find_loop(tilted, {v2(0.3, -0.2), v2(2, 1)}, "a"));
  double defect = 0.0, min_rdot = 1e300;
  for (int i = 0; i < 100; ++i) {
    const auto& [m, loop] = loops[static_cast<std::size_t>(i) % loops.size()];
    double delta = rng.uniform(-0.03, 0.03);
    if (std::abs(delta) < 1e-3) delta = 1e-3;
    const RadialDecomposition rd = radial_decomposition(m, loop, delta, rng.uniform(0.0, 0.05));
    defect = std::max(defect, rd.max_gauss_defect);
    min_rdot = std::min(min_rdot, rd.min_abs_rdot);
  }
  c.expect(defect < 1e-8, "max Gauss defect " + fmt("%.3g", defect));
  c.expect(min_rdot >= 1.0 - 1e-8, "min |r'| " + fmt("%.12g", min_rdot));
  c.note("max defect " + fmt("%.2g", defect) + ", min |r'| " + fmt("%.12g", min_rdot));
  return c.done();
}

// ---- 6 -----------------------------------------------------------------------

Outcome dexp_finite_differences() {
  Checker c;
  const std::vector<SpacetimeModel> models{warped_cylinder(), warped_cylinder(WarpProfile::one_plus_eps_x2, 0.3),
                                           ads2(), warped_cylinder(WarpProfile::cosh, 0.0, 1.0, false),
                                           cylinder(), minkowski(2)};
  Rng rng(601);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const SpacetimeModel& m = models[static_cast<std::size_t>(i) % models.size()];
    const TangentVec v{rng.uniform_box(2, 0.5), rng.uniform_ball(2, 3.0)};
    const Vec w = rng.uniform_ball(2, 1.0);
    const double h = 1e-5;
    const Vec fd = (exp_map(m, {v.base, v.comp + h * w}, 1e-13) - exp_map(m, {v.base, v.comp - h * w}, 1e-13)) / (2 * h);
    const Vec d = dexp(m, v, w, 1e-12);
    worst = std::max(worst, (d - fd).norm() / std::max(fd.norm(), 1e-12));
  }
  c.expect(worst < 1e-4, "max relative error " + fmt("%.3g", worst));
  c.note("max relative error " + fmt("%.2g", worst));
  return c.done();
}

// ---- 7 -----------------------------------------------------------------------

Outcome step_law() {
  Checker c;
  const SpacetimeModel m = warped_cylinder();
  const LoopCandidate loop = find_loop(m, {v2(0, 0.4), v2(1.05, 0.1)}, "T");
  const Eigen::Vector2d p(loop.base()[0], loop.base()[1]), v(loop.v.comp[0], loop.v.comp[1]);
  for (double delta : {0.02, 0.01, 0.005}) {
    const HillStep s = hill_step(m, loop, delta, ClimbDirection::stretch);
    const double measured = s.loop.length - loop.length;
    // Both branches of the law; the sign of r' picks one.
    const double eta = oracle::warped_eta(p, v, s.side);
    const double predicted = s.rdot_sign < 0 ? 2 * delta + eta : eta;
    c.expect(std::abs(measured - predicted) < 1e-6,
             "delta " + fmt("%g", delta) + ": measured " + fmt("%.10g", measured) + " vs " + fmt("%.10g", predicted));
    c.expect(std::abs(measured - (s.predicted_length - loop.length)) < 1e-6,
             "delta " + fmt("%g", delta) + ": internal prediction off");
    c.note(fmt("%g: ", delta) + fmt("%.2g", std::abs(measured - predicted)) + (s.rdot_sign < 0 ? " (2d+eta)" : " (eta)"));
  }
  return c.done();
}

// ---- 8 -----------------------------------------------------------------------

Outcome climb_convergence() {
  Checker c;
  const SpacetimeModel m = warped_cylinder();
  const oracle::GridHit hit = oracle::scan_warped_loop({0, 0.4}, {0.9, 0.0}, {1.2, 0.4}, 200, 60);
  const LoopCandidate start = find_loop(m, {v2(0, 0.4), Vec(hit.v)}, "T");
  c.expect(std::abs(start.v.comp[0] - hit.v[0]) <= hit.spacing && std::abs(start.v.comp[1] - hit.v[1]) <= hit.spacing,
           "start loop away from the grid-scan cell");
  c.expect(!is_closed_geodesic(m, start), "start loop is already closed");
  const HillClimbTrace trace = hill_climb(m, start, ClimbDirection::automatic);
  c.expect(trace.verdict == ClimbVerdict::closed_geodesic, std::string("verdict ") + to_string(trace.verdict));
  c.expect(std::abs(trace.final.length - 1.0) < 1e-6, "final length " + fmt("%.12g", trace.final.length));
  c.expect(trace.final.closure_defect < 1e-6, "closure defect " + fmt("%.3g", trace.final.closure_defect));
  c.note(std::to_string(trace.steps.size()) + " steps, length " + fmt("%.13g", trace.final.length));
  return c.done();
}

// ---- 9 -----------------------------------------------------------------------

Outcome clifford_suite() {
  Checker c;
  const SpacetimeModel flat = minkowski(2);
  const IsometryReport tr = is_clifford_translation(flat, {"T", Mat::Identity(2, 2), v2(1, 0)}, {100, 10.0, 7});
  c.expect(tr.clifford && tr.distance_spread < 1e-12, "translation spread " + fmt("%.3g", tr.distance_spread));
  Mat B(2, 2);
  B << std::cosh(0.5), std::sinh(0.5), std::sinh(0.5), std::cosh(0.5);
  const IsometryReport br = is_clifford_translation(flat, {"boost", B, Vec::Zero(2)}, {100, 10.0, 7});
  c.expect(!br.clifford, "boost reported as Clifford");

  Rng rng(901);
  std::vector<Vec> pts;
  for (int i = 0; i < 20; ++i) pts.push_back(rng.uniform_box(2, 5.0));
  const std::vector<LoopCandidate> loops = closed_geodesics_through(cylinder(), pts);
  double lo = 1e300, hi = -1e300;
  for (const LoopCandidate& l : loops) {
    c.expect(is_closed_geodesic(cylinder(), l), "loop not closed");
    c.expect(cylinder().classify(l.v).character == Causal::timelike, "loop not timelike");
    lo = std::min(lo, l.length);
    hi = std::max(hi, l.length);
  }
  c.expect(loops.size() == 20 && hi - lo < 1e-12, "loop length spread " + fmt("%.3g", hi - lo));
  c.note("boost spread " + fmt("%.3g", br.distance_spread) + ", loop spread " + fmt("%.2g", hi - lo));
  return c.done();
}

// ---- 10 ----------------------------------------------------------------------

Outcome determinism() {
  Checker c;
  const std::vector<std::vector<std::string>> commands{
      {"find-loop", "--model", "cylinder", "--base", "0,0", "--vel", "1,0"},
      {"bounds", "--model", "cylinder", "--base", "0,0", "--seed", "11"},
      {"path", "--model", "ads2", "--base", "0,0", "--vel", "6.597,0.01", "--deck", "identity", "--target",
       "1,0.8", "--steps", "16"},
      {"conjugate", "--model", "ads2", "--base", "0,0", "--vel", "1,0", "--T", "6.283185307179586"},
      {"hill-climb", "--model", "warped_cylinder", "--base", "0,0.4", "--vel", "1.05,0.1", "--format", "jsonl"},
      {"clifford", "--model", "minkowski", "--deck-map", R"({"A": [[1, 0], [0, 1]], "b": [1, 0]})",
       "--samples", "100", "--radius", "10", "--seed", "7"},
      {"closed-from-clifford", "--model", "cylinder", "--deck", "T", "--base", "0,0.3"},
  };
  for (const auto& args : commands) {
    std::ostringstream a, b, ea, eb;
    const int ca = cli::run_cli(args, a, ea);
    const int cb = cli::run_cli(args, b, eb);
    c.expect(ca == 0, args[0] + " exited with " + std::to_string(ca) + ": " + ea.str());
    c.expect(ca == cb && a.str() == b.str(), args[0] + " reports differ");
    c.expect(!a.str().empty(), args[0] + " wrote nothing");
  }
  c.note(std::to_string(commands.size()) + " commands compared");
  return c.done();
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"cylinder class bounds equal 1", 5.0, cylinder_class},
      {"AdS2 loops keep length 2 pi under continuation", 30.0, ads_class},
      {"no conjugate points on flat causal geodesics", 10.0, flat_no_conjugate_points},
      {"AdS2 circle conjugate at pi and 2 pi", 0.0, ads_conjugate_points},
      {"Gauss lemma and |r'| >= 1 on radial decompositions", 0.0, gauss_lemma},
      {"dexp agrees with finite differences", 0.0, dexp_finite_differences},
      {"stretch steps follow the length-change law", 0.0, step_law},
      {"hill climb reaches the x = 0 circle", 60.0, climb_convergence},
      {"Clifford translations and their closed geodesics", 0.0, clifford_suite},
      {"CLI reports are byte-identical across runs", 0.0, determinism},
  };
  int failed = 0;
  const int total = static_cast<int>(criteria.size());
  for (int k = 0; k < total; ++k) {
    const Criterion& cr = criteria[static_cast<std::size_t>(k)];
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = cr.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (cr.budget_s > 0 && secs >= cr.budget_s) {
      o.pass = false;
      o.detail += " [runtime " + fmt("%.2f", secs) + " s over " + fmt("%g", cr.budget_s) + " s]";
    }
    failed += !o.pass;
    std::printf("%s [%d/%d] %s (%s; %.2f s)\n", o.pass ? "PASS" : "FAIL", k + 1, total, cr.title.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", total - failed, total);
  return failed == 0 ? 0 : 1;
}
