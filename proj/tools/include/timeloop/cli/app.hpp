#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace timeloop::cli {

using json = nlohmann::ordered_json;

enum ExitCode : int { kExitOk = 0, kExitDomain = 1, kExitNoConvergence = 2 };

/// Fully resolved settings of one invocation.
struct RunConfig {
  std::string command;
  std::string model = "cylinder";
  double tol_integ = 1e-10;
  double tol_solve = 1e-10;
  double tol_closure = 1e-8;
  double tol_self_conjugate = 1e-6;
  std::uint64_t seed = 1;
  std::string out;            // empty writes to the given stream
  std::string format = "json";  // json | jsonl | csv
  std::string dump;           // optional CSV side output
  std::vector<double> base;
  std::vector<double> vel;
  std::vector<double> target;
  double T = 1.0;
  std::string deck;           // group word, "identity", or empty for automatic
  std::string deck_map;       // inline {"A": ..., "b": ...} for clifford commands
  std::string mode = "fixed";   // fixed | free
  std::string direction = "auto";
  double delta0 = 0.0;        // 0 selects length / 50
  int steps = 8;
  int samples = 0;            // 0 selects the command default
  double radius = 0.5;
  int max_iter = 50;
  int max_steps = 200;
};

const std::vector<std::string>& command_names();

/// Range checks; throws ConfigError.
void validate(const RunConfig& cfg);

json to_json(const RunConfig& cfg);

/// Applies {"key": value} pairs (flag names without dashes) to cfg, except
/// keys listed in `explicit_keys`. Unknown keys raise ConfigError.
void apply_config_json(RunConfig& cfg, const json& obj, const std::vector<std::string>& explicit_keys);

/// Runs the command and writes the report to cfg.out or `out`.
int dispatch(const RunConfig& cfg, std::ostream& out);

/// Full command line entry point (argv[0] excluded from `args`).
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace timeloop::cli
