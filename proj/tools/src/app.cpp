#include "timeloop/cli/app.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "timeloop/cli/model_spec.hpp"
#include "timeloop/timeloop.hpp"

namespace timeloop::cli {
namespace {

// ---- serialization --------------------------------------------------------

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Vec to_vec(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json loop_json(const SpacetimeModel& model, const LoopCandidate& loop, double sc_tol, bool with_sc) {
  json j;
  j["base"] = vec_json(loop.base());
  j["v"] = vec_json(loop.v.comp);
  j["deck"] = loop.deck;
  j["residual_norm"] = loop.residual_norm;
  j["length"] = loop.length;
  j["closure_defect"] = loop.closure_defect;
  if (with_sc) {
    try {
      const SelfConjugacy sc = is_self_conjugate(model, loop, sc_tol);
      j["self_conjugate_det"] = sc.det;
      j["self_conjugate_normalized"] = sc.normalized;
      j["self_conjugate"] = sc.self_conjugate;
    } catch (const Error& e) {
      j["self_conjugate_det"] = nullptr;
      j["self_conjugate_error"] = e.what();
    }
  }
  j["end_velocity"] = loop.end_velocity.size() ? vec_json(loop.end_velocity) : json::array();
  j["converged"] = loop.converged;
  j["iterations"] = loop.iterations;
  j["provenance"] = loop.converged ? "certified-by-residual" : "unconverged";
  return j;
}

void merge_into(json& dst, const json& src) {
  for (auto it = src.begin(); it != src.end(); ++it) dst[it.key()] = it.value();
}

std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

// ---- report -----------------------------------------------------------------

struct Report {
  json summary = json::object();
  std::vector<json> records;
  std::string csv;
  int exit_code = kExitOk;
};

/// Failure raised inside a command that still carries a partial report.
struct CommandFailure {
  int exit_code;
  std::string kind;
  std::string message;
  json best;
};

struct Context {
  const RunConfig& cfg;
  SpacetimeModel model;
  json model_spec;

  int n() const { return model.dim(); }

  Vec base() const {
    if (cfg.base.empty()) return Vec::Zero(n());
    if (static_cast<int>(cfg.base.size()) != n())
      throw ConfigError("--base needs " + std::to_string(n()) + " components");
    return to_vec(cfg.base);
  }
  Vec vel(bool required) const {
    if (cfg.vel.empty()) {
      if (required) throw ConfigError("--vel is required for '" + cfg.command + "'");
      return Vec();
    }
    if (static_cast<int>(cfg.vel.size()) != n())
      throw ConfigError("--vel needs " + std::to_string(n()) + " components");
    return to_vec(cfg.vel);
  }
  Vec target() const {
    if (cfg.target.empty()) throw ConfigError("--target is required for '" + cfg.command + "'");
    if (static_cast<int>(cfg.target.size()) != n())
      throw ConfigError("--target needs " + std::to_string(n()) + " components");
    return to_vec(cfg.target);
  }
  SolverOptions solver() const {
    SolverOptions o;
    o.tol = cfg.tol_solve;
    o.max_iter = cfg.max_iter;
    o.mode = cfg.mode == "free" ? ShootingMode::free_base : ShootingMode::fixed_base;
    o.integrator_tol = std::max(1e-14, cfg.tol_integ * 1e-2);
    return o;
  }
  int samples(int fallback) const { return cfg.samples > 0 ? cfg.samples : fallback; }
};

/// Solves for the starting loop of the loop-based commands.
LoopCandidate initial_loop(const Context& ctx) {
  const Vec p = ctx.base();
  ctx.model.require_in_domain(p);
  SolverOptions o = ctx.solver();
  try {
    if (ctx.cfg.deck.empty() && ctx.cfg.vel.empty()) return find_any_loop(ctx.model, p, o);
    if (ctx.model.loop_classes().empty() && ctx.cfg.deck.empty())
      throw ConfigError("no loop class available");
    const std::string label = ctx.cfg.deck.empty() ? ctx.model.loop_classes().front().label : ctx.cfg.deck;
    const DeckElement d = ctx.model.deck(label);
    const Vec seed = ctx.cfg.vel.empty() ? chord_seed(ctx.model, p, d) : ctx.vel(true);
    return find_loop(ctx.model, {p, seed}, d.label, o);
  } catch (const NoConvergence& e) {
    throw CommandFailure{kExitNoConvergence, "NoConvergence", e.what(),
                         loop_json(ctx.model, e.best(), ctx.cfg.tol_self_conjugate, false)};
  } catch (const SingularJacobian& e) {
    json best = loop_json(ctx.model, e.best(), ctx.cfg.tol_self_conjugate, false);
    best["condition"] = e.condition();
    throw CommandFailure{kExitNoConvergence, "SingularJacobian", e.what(), best};
  }
}

DeckElement deck_for_clifford(const Context& ctx) {
  if (!ctx.cfg.deck_map.empty()) {
    json m;
    try {
      m = json::parse(ctx.cfg.deck_map);
    } catch (const json::parse_error& e) {
      throw ConfigError(std::string("--deck-map is not valid JSON: ") + e.what());
    }
    if (!m.is_object() || !m.contains("b")) throw ConfigError("--deck-map needs at least a \"b\" entry");
    for (const auto& [k, v] : m.items())
      if (k != "A" && k != "b" && k != "name") throw ConfigError("--deck-map: unknown key '" + k + "'");
    const int n = ctx.n();
    DeckElement d;
    d.label = m.contains("name") ? m.at("name").get<std::string>() : "inline";
    d.A = Mat::Identity(n, n);
    if (m.contains("A")) {
      const auto rows = m.at("A");
      if (!rows.is_array() || static_cast<int>(rows.size()) != n)
        throw ConfigError("--deck-map: A must be an n x n matrix");
      for (int i = 0; i < n; ++i) {
        if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != n)
          throw ConfigError("--deck-map: A must be an n x n matrix");
        for (int k = 0; k < n; ++k) d.A(i, k) = rows[i][k].get<double>();
      }
    }
    const auto b = m.at("b");
    if (!b.is_array() || static_cast<int>(b.size()) != n) throw ConfigError("--deck-map: b must have n entries");
    d.b.resize(n);
    for (int i = 0; i < n; ++i) d.b[i] = b[i].get<double>();
    return d;
  }
  if (!ctx.cfg.deck.empty()) return ctx.model.deck(ctx.cfg.deck);
  const auto classes = ctx.model.loop_classes();
  if (classes.empty()) throw ConfigError("no deck element given and the model has no deck group");
  return classes.front();
}

CoveringSampling covering_sampling(const Context& ctx) {
  CoveringSampling s;
  s.samples = ctx.samples(100);
  s.radius = ctx.cfg.radius;
  s.seed = ctx.cfg.seed;
  return s;
}

// ---- commands ---------------------------------------------------------------

Report cmd_classify(const Context& ctx) {
  const TangentVec v{ctx.base(), ctx.vel(true)};
  ctx.model.require_in_domain(v.base);
  const CausalTag tag = ctx.model.classify(v);
  Report r;
  r.summary["character"] = to_string(tag.character);
  r.summary["orientation"] = to_string(tag.orientation);
  r.summary["norm"] = ctx.model.norm(v);
  r.summary["g_vv"] = ctx.model.inner(v.base, v.comp, v.comp);
  r.summary["metric"] = json::array();
  const Mat g = ctx.model.metric_at(v.base);
  for (Eigen::Index i = 0; i < g.rows(); ++i) r.summary["metric"].push_back(vec_json(g.row(i).transpose()));
  return r;
}

Report cmd_geodesic(const Context& ctx) {
  const TangentVec v{ctx.base(), ctx.vel(true)};
  const GeodesicSegment seg = integrate_geodesic(ctx.model, v, ctx.cfg.T, ctx.cfg.tol_integ);
  Report r;
  r.summary["T"] = seg.T();
  r.summary["character"] = to_string(seg.character().character);
  r.summary["orientation"] = to_string(seg.character().orientation);
  r.summary["end_point"] = vec_json(seg.end_point());
  r.summary["end_velocity"] = vec_json(seg.end_velocity());
  r.summary["length"] = seg.length();
  r.summary["length_quadrature"] = length(seg);
  r.summary["energy_drift"] = seg.energy_drift();
  r.summary["integrator_steps"] = seg.nodes().size() - 1;
  if (ctx.model.has_fundamental_domain())
    r.summary["end_point_canonical"] = vec_json(ctx.model.canonicalize(seg.end_point()));
  std::ostringstream csv;
  csv << "t";
  for (int i = 0; i < ctx.n(); ++i) csv << ",x_" << i;
  for (int i = 0; i < ctx.n(); ++i) csv << ",v_" << i;
  csv << "\n";
  for (const TrajectorySample& s : sample_uniform(seg, ctx.samples(101))) {
    csv << csv_number(s.t);
    for (int i = 0; i < ctx.n(); ++i) csv << "," << csv_number(s.x[i]);
    for (int i = 0; i < ctx.n(); ++i) csv << "," << csv_number(s.v[i]);
    csv << "\n";
  }
  r.csv = csv.str();
  return r;
}

Report cmd_expmap(const Context& ctx) {
  const TangentVec v{ctx.base(), ctx.vel(true)};
  const Vec q = exp_map(ctx.model, v, ctx.cfg.tol_integ);
  Report r;
  r.summary["point"] = vec_json(q);
  if (ctx.model.has_fundamental_domain()) r.summary["point_canonical"] = vec_json(ctx.model.canonicalize(q));
  return r;
}

Report cmd_conjugate(const Context& ctx) {
  const TangentVec v{ctx.base(), ctx.vel(true)};
  const GeodesicSegment seg = integrate_geodesic(ctx.model, v, ctx.cfg.T, ctx.cfg.tol_integ);
  ConjugateOptions o;
  o.integrator_tol = ctx.cfg.tol_integ;
  Report r;
  r.summary["T"] = seg.T();
  r.summary["character"] = to_string(seg.character().character);
  r.summary["conjugate_points"] = json::array();
  for (double t : conjugate_points(ctx.model, seg, o)) r.summary["conjugate_points"].push_back(t);
  const DeterminantProfile prof = determinant_profile(ctx.model, seg, o);
  std::ostringstream csv;
  csv << "t,det\n";
  for (std::size_t i = 0; i < prof.t.size(); ++i)
    csv << csv_number(prof.t[i]) << "," << csv_number(prof.value[i]) << "\n";
  r.csv = csv.str();
  return r;
}

Report cmd_find_loop(const Context& ctx) {
  const LoopCandidate loop = initial_loop(ctx);
  Report r;
  r.summary["loop"] = loop_json(ctx.model, loop, ctx.cfg.tol_self_conjugate, true);
  r.summary["closed_geodesic"] = is_closed_geodesic(ctx.model, loop, ctx.cfg.tol_closure);
  return r;
}

json path_node_record(const Context& ctx, const LoopCandidate& node, std::size_t k, std::size_t count) {
  json rec;
  rec["record"] = "node";
  rec["index"] = k;
  rec["s"] = count > 1 ? static_cast<double>(k) / static_cast<double>(count - 1) : 0.0;
  merge_into(rec, loop_json(ctx.model, node, ctx.cfg.tol_self_conjugate, false));
  return rec;
}

Report cmd_path(const Context& ctx) {
  const LoopCandidate start = initial_loop(ctx);
  ContinuationOptions o;
  o.steps = ctx.cfg.steps;
  o.solver = ctx.solver();
  const HomotopyPath path = continuation_path(ctx.model, start, ctx.target(), o);
  Report r;
  std::ostringstream csv;
  csv << "index,s";
  for (int i = 0; i < ctx.n(); ++i) csv << ",base_" << i;
  for (int i = 0; i < ctx.n(); ++i) csv << ",v_" << i;
  csv << ",length,closure_defect\n";
  double lo = start.length, hi = start.length;
  for (std::size_t k = 0; k < path.nodes.size(); ++k) {
    const LoopCandidate& node = path.nodes[k];
    r.records.push_back(path_node_record(ctx, node, k, static_cast<std::size_t>(o.steps) + 1));
    lo = std::min(lo, node.length);
    hi = std::max(hi, node.length);
    csv << k << "," << csv_number(static_cast<double>(k) / o.steps);
    for (int i = 0; i < ctx.n(); ++i) csv << "," << csv_number(node.base()[i]);
    for (int i = 0; i < ctx.n(); ++i) csv << "," << csv_number(node.v.comp[i]);
    csv << "," << csv_number(node.length) << "," << csv_number(node.closure_defect) << "\n";
  }
  r.csv = csv.str();
  r.summary["deck"] = start.deck;
  r.summary["nodes"] = path.nodes.size();
  r.summary["complete"] = path.complete;
  r.summary["continuous"] = path.continuous;
  r.summary["step_bound"] = path.step_bound;
  r.summary["min_length"] = lo;
  r.summary["max_length"] = hi;
  if (!path.complete) {
    r.summary["event"] = path.event;
    r.summary["event_message"] = path.event_what;
    r.summary["event_s"] = path.event_s;
    r.summary["event_base"] = vec_json(path.event_base);
    r.exit_code = kExitNoConvergence;
  }
  return r;
}

Report cmd_bounds(const Context& ctx) {
  const LoopCandidate start = initial_loop(ctx);
  SamplerOptions o;
  o.n_samples = ctx.samples(16);
  o.radius = ctx.cfg.radius;
  o.steps = ctx.cfg.steps;
  o.seed = ctx.cfg.seed;
  o.solver = ctx.solver();
  const ClassBounds b = class_length_bounds(ctx.model, start, o);
  Report r;
  std::ostringstream csv;
  csv << "walk,index,length\n";
  for (std::size_t w = 0; w < b.walks.size(); ++w) {
    const HomotopyPath& path = b.walks[w];
    json rec;
    rec["record"] = "walk";
    rec["walk"] = w;
    rec["nodes"] = path.nodes.size();
    rec["complete"] = path.complete;
    if (!path.complete) rec["event"] = path.event;
    rec["end_base"] = vec_json(path.base_curve.back());
    rec["lengths"] = json::array();
    for (std::size_t k = 0; k < path.nodes.size(); ++k) {
      rec["lengths"].push_back(path.nodes[k].length);
      csv << w << "," << k << "," << csv_number(path.nodes[k].length) << "\n";
    }
    r.records.push_back(std::move(rec));
  }
  r.csv = csv.str();
  r.summary["provenance"] = "estimated";
  r.summary["estimated"] = true;
  r.summary["l_est"] = b.l_est;
  r.summary["L_est"] = b.L_est;
  r.summary["loops_visited"] = b.loops_visited;
  r.summary["warnings"] = b.warnings;
  r.summary["start"] = loop_json(ctx.model, start, ctx.cfg.tol_self_conjugate, true);
  r.summary["argmin"] = loop_json(ctx.model, b.argmin, ctx.cfg.tol_self_conjugate, false);
  r.summary["argmax"] = loop_json(ctx.model, b.argmax, ctx.cfg.tol_self_conjugate, false);
  return r;
}

Report cmd_hill_climb(const Context& ctx) {
  const LoopCandidate start = initial_loop(ctx);
  HillClimbParams p;
  p.delta0 = ctx.cfg.delta0;
  p.closure_tol = ctx.cfg.tol_closure;
  p.self_conjugate_tol = ctx.cfg.tol_self_conjugate;
  p.max_steps = ctx.cfg.max_steps;
  p.step.solver = ctx.solver();
  const HillClimbTrace trace = hill_climb(ctx.model, start, parse_direction(ctx.cfg.direction), p);

  Report r;
  json first;
  first["record"] = "start";
  merge_into(first, loop_json(ctx.model, start, ctx.cfg.tol_self_conjugate, true));
  r.records.push_back(std::move(first));
  std::ostringstream csv;
  csv << "step,length,delta,side,eta,rdot_sign,closure_defect\n";
  csv << "0," << csv_number(start.length) << ",0,0,0,0," << csv_number(start.closure_defect) << "\n";
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const HillStep& s = trace.steps[i];
    json rec;
    rec["record"] = "step";
    rec["step_index"] = i + 1;
    rec["base"] = vec_json(s.loop.base());
    rec["v"] = vec_json(s.loop.v.comp);
    rec["length"] = s.loop.length;
    rec["delta"] = s.delta;
    rec["side"] = s.side;
    rec["direction"] = to_string(s.direction);
    rec["eta"] = s.eta;
    rec["rdot_sign"] = s.rdot_sign;
    rec["predicted_length"] = s.predicted_length;
    rec["closure_defect"] = s.loop.closure_defect;
    r.records.push_back(std::move(rec));
    csv << i + 1 << "," << csv_number(s.loop.length) << "," << csv_number(s.delta) << ","
        << csv_number(s.side) << "," << csv_number(s.eta) << "," << s.rdot_sign << ","
        << csv_number(s.loop.closure_defect) << "\n";
  }
  r.csv = csv.str();
  r.summary["verdict"] = to_string(trace.verdict);
  r.summary["direction"] = to_string(trace.direction);
  r.summary["steps"] = trace.steps.size();
  r.summary["refined"] = trace.refined;
  r.summary["final"] = loop_json(ctx.model, trace.final, ctx.cfg.tol_self_conjugate, true);
  r.summary["length"] = trace.final.length;
  if (!trace.note.empty()) r.summary["note"] = trace.note;
  switch (trace.verdict) {
    case ClimbVerdict::closed_geodesic: r.exit_code = kExitOk; break;
    case ClimbVerdict::budget_exhausted: r.exit_code = kExitNoConvergence; break;
    default: r.exit_code = kExitDomain; break;
  }
  return r;
}

Report cmd_clifford(const Context& ctx) {
  const DeckElement d = deck_for_clifford(ctx);
  const IsometryReport rep = is_clifford_translation(ctx.model, d, covering_sampling(ctx), 1e-12 * std::max(1.0, d.b.norm()));
  Report r;
  r.summary["deck"] = d.label;
  r.summary["A"] = json::array();
  for (Eigen::Index i = 0; i < d.A.rows(); ++i) r.summary["A"].push_back(vec_json(d.A.row(i).transpose()));
  r.summary["b"] = vec_json(d.b);
  r.summary["future_timelike"] = rep.future_timelike;
  r.summary["clifford"] = rep.clifford;
  r.summary["distance_spread"] = rep.distance_spread;
  r.summary["provenance"] = "sampled";
  std::ostringstream csv;
  csv << "index";
  for (int i = 0; i < ctx.n(); ++i) csv << ",p_" << i;
  csv << ",distance\n";
  json samples = json::array();
  for (std::size_t k = 0; k < rep.distance_samples.size(); ++k) {
    const DistanceSample& s = rep.distance_samples[k];
    samples.push_back(json{{"point", vec_json(s.point)}, {"distance", s.distance}});
    csv << k;
    for (int i = 0; i < ctx.n(); ++i) csv << "," << csv_number(s.point[i]);
    csv << "," << csv_number(s.distance) << "\n";
  }
  r.summary["distance_samples"] = std::move(samples);
  r.csv = csv.str();
  return r;
}

Report cmd_closed_from_clifford(const Context& ctx) {
  const std::string label = ctx.cfg.deck.empty() ? find_clifford_class(ctx.model, covering_sampling(ctx)).label : ctx.cfg.deck;
  const LoopCandidate loop = closed_geodesic_from_clifford(ctx.model, label, ctx.base(), covering_sampling(ctx));
  Report r;
  r.summary["loop"] = loop_json(ctx.model, loop, ctx.cfg.tol_self_conjugate, true);
  r.summary["closed_geodesic"] = is_closed_geodesic(ctx.model, loop, ctx.cfg.tol_closure);
  return r;
}

Report run_command(const Context& ctx) {
  const std::string& c = ctx.cfg.command;
  if (c == "classify") return cmd_classify(ctx);
  if (c == "geodesic") return cmd_geodesic(ctx);
  if (c == "expmap") return cmd_expmap(ctx);
  if (c == "conjugate") return cmd_conjugate(ctx);
  if (c == "find-loop") return cmd_find_loop(ctx);
  if (c == "path") return cmd_path(ctx);
  if (c == "bounds") return cmd_bounds(ctx);
  if (c == "hill-climb") return cmd_hill_climb(ctx);
  if (c == "clifford") return cmd_clifford(ctx);
  if (c == "closed-from-clifford") return cmd_closed_from_clifford(ctx);
  throw ConfigError("unknown command '" + c + "'");
}

void write_report(const RunConfig& cfg, const json& config, const Report& rep, std::ostream& out) {
  std::ostringstream body;
  if (cfg.format == "csv") {
    body << rep.csv;
  } else if (cfg.format == "jsonl") {
    body << json{{"record", "config"}, {"command", cfg.command}, {"config", config}}.dump() << "\n";
    for (const json& rec : rep.records) body << rec.dump() << "\n";
    json fin = rep.summary;
    fin["record"] = "final";
    fin["exit_code"] = rep.exit_code;
    body << fin.dump() << "\n";
  } else {
    json doc;
    doc["command"] = cfg.command;
    doc["config"] = config;
    merge_into(doc, rep.summary);
    if (!rep.records.empty()) doc["records"] = rep.records;
    doc["exit_code"] = rep.exit_code;
    body << doc.dump(2) << "\n";
  }
  if (cfg.out.empty()) {
    out << body.str();
  } else {
    std::ofstream f(cfg.out, std::ios::binary);
    if (!f) throw ConfigError("cannot write report to '" + cfg.out + "'");
    f << body.str();
  }
  if (!cfg.dump.empty() && !rep.csv.empty()) {
    std::ofstream f(cfg.dump, std::ios::binary);
    if (!f) throw ConfigError("cannot write dump to '" + cfg.dump + "'");
    f << rep.csv;
  }
}

Report error_report(const std::string& kind, const std::string& message, int code, json best = nullptr) {
  Report r;
  r.summary["error"] = json{{"kind", kind}, {"message", message}};
  if (!best.is_null()) r.summary["best"] = std::move(best);
  r.exit_code = code;
  return r;
}

void init_logging() {
  static bool done = false;
  if (done) return;
  done = true;
  auto logger = spdlog::stderr_color_mt("tl");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  const char* env = std::getenv("TL_LOG");
  spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
}

}  // namespace

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"classify", "geodesic", "expmap", "conjugate",
                                              "find-loop", "path", "bounds", "hill-climb",
                                              "clifford", "closed-from-clifford"};
  return names;
}

void validate(const RunConfig& cfg) {
  auto in_range = [](double x, double lo, double hi, const char* name) {
    if (!(x >= lo && x <= hi)) {
      std::ostringstream os;
      os << name << " = " << x << " outside [" << lo << ", " << hi << "]";
      throw ConfigError(os.str());
    }
  };
  if (std::find(command_names().begin(), command_names().end(), cfg.command) == command_names().end())
    throw ConfigError("unknown command '" + cfg.command + "'");
  in_range(cfg.tol_integ, 1e-14, 1e-3, "tol-integ");
  in_range(cfg.tol_solve, 1e-12, 1e-2, "tol-solve");
  in_range(cfg.tol_closure, 1e-14, 1.0, "tol-closure");
  in_range(cfg.tol_self_conjugate, 1e-16, 0.5, "tol-self-conjugate");
  if (cfg.format != "json" && cfg.format != "jsonl" && cfg.format != "csv")
    throw ConfigError("format must be json, jsonl or csv");
  if (cfg.mode != "fixed" && cfg.mode != "free") throw ConfigError("mode must be fixed or free");
  parse_direction(cfg.direction);
  if (!(cfg.T > 0.0)) throw ConfigError("T must be positive");
  if (cfg.steps < 1 || cfg.steps > 100000) throw ConfigError("steps must be in [1, 100000]");
  if (cfg.samples < 0 || cfg.samples > 1000000) throw ConfigError("samples must be in [0, 1000000]");
  if (!(cfg.radius > 0.0)) throw ConfigError("radius must be positive");
  if (cfg.max_iter < 1) throw ConfigError("max-iter must be at least 1");
  if (cfg.max_steps < 1) throw ConfigError("max-steps must be at least 1");
  if (cfg.delta0 < 0.0) throw ConfigError("delta0 must be non-negative");
}

json to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["model"] = c.model;
  j["tol-integ"] = c.tol_integ;
  j["tol-solve"] = c.tol_solve;
  j["tol-closure"] = c.tol_closure;
  j["tol-self-conjugate"] = c.tol_self_conjugate;
  j["seed"] = c.seed;
  j["out"] = c.out;
  j["format"] = c.format;
  j["dump"] = c.dump;
  j["base"] = c.base;
  j["vel"] = c.vel;
  j["target"] = c.target;
  j["T"] = c.T;
  j["deck"] = c.deck;
  j["deck-map"] = c.deck_map;
  j["mode"] = c.mode;
  j["direction"] = c.direction;
  j["delta0"] = c.delta0;
  j["steps"] = c.steps;
  j["samples"] = c.samples;
  j["radius"] = c.radius;
  j["max-iter"] = c.max_iter;
  j["max-steps"] = c.max_steps;
  return j;
}

void apply_config_json(RunConfig& c, const json& obj, const std::vector<std::string>& explicit_keys) {
  if (!obj.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(explicit_keys.begin(), explicit_keys.end(), key) != explicit_keys.end()) continue;
    try {
      if (key == "model") c.model = value.get<std::string>();
      else if (key == "tol-integ") c.tol_integ = value.get<double>();
      else if (key == "tol-solve") c.tol_solve = value.get<double>();
      else if (key == "tol-closure") c.tol_closure = value.get<double>();
      else if (key == "tol-self-conjugate") c.tol_self_conjugate = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "out") c.out = value.get<std::string>();
      else if (key == "format") c.format = value.get<std::string>();
      else if (key == "dump") c.dump = value.get<std::string>();
      else if (key == "base") c.base = value.get<std::vector<double>>();
      else if (key == "vel") c.vel = value.get<std::vector<double>>();
      else if (key == "target") c.target = value.get<std::vector<double>>();
      else if (key == "T") c.T = value.get<double>();
      else if (key == "deck") c.deck = value.get<std::string>();
      else if (key == "deck-map") c.deck_map = value.is_string() ? value.get<std::string>() : value.dump();
      else if (key == "mode") c.mode = value.get<std::string>();
      else if (key == "direction") c.direction = value.get<std::string>();
      else if (key == "delta0") c.delta0 = value.get<double>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "samples") c.samples = value.get<int>();
      else if (key == "radius") c.radius = value.get<double>();
      else if (key == "max-iter") c.max_iter = value.get<int>();
      else if (key == "max-steps") c.max_steps = value.get<int>();
      else if (key == "command") {
        if (value.get<std::string>() != c.command)
          throw ConfigError("config file is for command '" + value.get<std::string>() + "'");
      } else {
        throw ConfigError("config file: unknown key '" + key + "'");
      }
    } catch (const json::type_error& e) {
      throw ConfigError("config file: key '" + key + "' has the wrong type (" + e.what() + ")");
    }
  }
}

int dispatch(const RunConfig& cfg, std::ostream& out) {
  init_logging();
  json config = to_json(cfg);
  Report rep;
  try {
    validate(cfg);
    config["model-spec"] = resolve_model_spec(cfg.model);
    const Context ctx{cfg, parse_model_spec(config["model-spec"]), config["model-spec"]};
    spdlog::info("running {} on model {}", cfg.command, ctx.model.name());
    rep = run_command(ctx);
  } catch (const CommandFailure& f) {
    rep = error_report(f.kind, f.message, f.exit_code, f.best);
  } catch (const ConfigError& e) {
    rep = error_report("ConfigError", e.what(), kExitDomain);
  } catch (const DomainError& e) {
    rep = error_report("DomainError", e.what(), kExitDomain);
  } catch (const PreconditionError& e) {
    rep = error_report("PreconditionError", e.what(), kExitDomain);
  } catch (const IntegrationError& e) {
    rep = error_report("IntegrationError", e.what(), kExitDomain);
    rep.summary["error"]["last_valid"] = e.last_valid();
  } catch (const NoConvergence& e) {
    rep = error_report("NoConvergence", e.what(), kExitNoConvergence);
  } catch (const SingularJacobian& e) {
    rep = error_report("SingularJacobian", e.what(), kExitNoConvergence);
  } catch (const InversionFailure& e) {
    rep = error_report("InversionFailure", e.what(), kExitNoConvergence);
  } catch (const Error& e) {
    rep = error_report("Error", e.what(), kExitDomain);
  }
  if (rep.summary.contains("error")) {
    spdlog::error("{}", rep.summary["error"]["message"].get<std::string>());
    if (cfg.format == "csv") {
      // No CSV for failures; fall back to a JSON error document.
      RunConfig json_cfg = cfg;
      json_cfg.format = "json";
      write_report(json_cfg, config, rep, out);
      return rep.exit_code;
    }
  } else if (cfg.format == "csv" && rep.csv.empty()) {
    rep = error_report("ConfigError", "command '" + cfg.command + "' has no CSV output", kExitDomain);
    RunConfig json_cfg = cfg;
    json_cfg.format = "json";
    write_report(json_cfg, config, rep, out);
    return rep.exit_code;
  }
  try {
    write_report(cfg, config, rep, out);
  } catch (const ConfigError& e) {
    spdlog::error("{}", e.what());
    return kExitDomain;
  }
  return rep.exit_code;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed timelike geodesic search on chart-defined Lorentzian manifolds", "tl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "timeloop 0.1.0");
  RunConfig cfg;
  std::string config_path;

  // Options shared by all subcommands, registered on each so they may
  // follow the subcommand name.
  std::vector<std::pair<std::string, CLI::Option*>> options;
  auto add_common = [&](CLI::App* sub) {
    auto reg = [&](const std::string& key, CLI::Option* opt) { options.emplace_back(key, opt); };
    reg("model", sub->add_option("--model", cfg.model, "builtin model name or JSON model spec path"));
    reg("tol-integ", sub->add_option("--tol-integ", cfg.tol_integ, "integrator tolerance"));
    reg("tol-solve", sub->add_option("--tol-solve", cfg.tol_solve, "Newton residual tolerance"));
    reg("tol-closure", sub->add_option("--tol-closure", cfg.tol_closure, "closed-geodesic velocity tolerance"));
    reg("tol-self-conjugate", sub->add_option("--tol-self-conjugate", cfg.tol_self_conjugate, "normalized determinant threshold"));
    reg("seed", sub->add_option("--seed", cfg.seed, "RNG seed"));
    reg("out", sub->add_option("--out", cfg.out, "report path (default stdout)"));
    reg("format", sub->add_option("--format", cfg.format, "json, jsonl or csv"));
    reg("dump", sub->add_option("--dump", cfg.dump, "write plot data as CSV to this path"));
    reg("base", sub->add_option("--base", cfg.base, "base point, comma separated")->delimiter(','));
    reg("vel", sub->add_option("--vel", cfg.vel, "initial velocity or loop seed, comma separated")->delimiter(','));
    reg("target", sub->add_option("--target", cfg.target, "continuation target base point")->delimiter(','));
    reg("T", sub->add_option("--T", cfg.T, "affine parameter span"));
    reg("deck", sub->add_option("--deck", cfg.deck, "deck group word, e.g. T, T^2, a*b^-1, identity"));
    reg("deck-map", sub->add_option("--deck-map", cfg.deck_map, "inline deck element {\"A\": [[..]], \"b\": [..]}"));
    reg("mode", sub->add_option("--mode", cfg.mode, "shooting mode: fixed or free"));
    reg("direction", sub->add_option("--direction", cfg.direction, "stretch, shorten or auto"));
    reg("delta0", sub->add_option("--delta0", cfg.delta0, "initial hill-climb step (0: length/50)"));
    reg("steps", sub->add_option("--steps", cfg.steps, "continuation steps"));
    reg("samples", sub->add_option("--samples", cfg.samples, "sample count (0: command default)"));
    reg("radius", sub->add_option("--radius", cfg.radius, "sampling radius"));
    reg("max-iter", sub->add_option("--max-iter", cfg.max_iter, "Newton iteration budget"));
    reg("max-steps", sub->add_option("--max-steps", cfg.max_steps, "hill-climb step budget"));
    sub->add_option("--config", config_path, "JSON file with defaults for the flags above");
  };
  static const std::map<std::string, std::string> help{
      {"classify", "causal character and norm of --vel at --base"},
      {"geodesic", "integrate a geodesic for parameter --T"},
      {"expmap", "exponential map of --vel at --base"},
      {"conjugate", "conjugate points and the Jacobi determinant profile"},
      {"find-loop", "solve for a timelike geodesic loop in a deck class"},
      {"path", "continue a loop while moving its base towards --target"},
      {"bounds", "sampled length bounds over a loop class"},
      {"hill-climb", "deform a loop until it closes up or stalls"},
      {"clifford", "test a deck element for the Clifford property"},
      {"closed-from-clifford", "closed geodesic from a Clifford translation"},
  };
  for (const std::string& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, help.at(name));
    add_common(sub);
    sub->callback([&cfg, name] { cfg.command = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, eo;
    const int code = app.exit(e, o, eo);
    out << o.str();
    err << eo.str();
    return code == 0 ? kExitOk : kExitDomain;
  }
  if (!config_path.empty()) {
    try {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read config file '" + config_path + "'");
      json obj;
      try {
        obj = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config file: ") + e.what());
      }
      std::vector<std::string> explicit_keys;
      for (const auto& [key, opt] : options)
        if (opt->count() > 0) explicit_keys.push_back(key);
      apply_config_json(cfg, obj, explicit_keys);
    } catch (const ConfigError& e) {
      err << "error: " << e.what() << "\n";
      return kExitDomain;
    }
  }
  return dispatch(cfg, out);
}

}  // namespace timeloop::cli
