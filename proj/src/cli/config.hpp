#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wavectl::cli {

struct ParseError : std::runtime_error {
  int line;
  ParseError(int line_, const std::string& what)
      : std::runtime_error("line " + std::to_string(line_) + ": " + what), line(line_) {}
};

struct ValidationError : std::runtime_error {
  std::string field;
  ValidationError(std::string field_, const std::string& what)
      : std::runtime_error("field '" + field_ + "': " + what), field(std::move(field_)) {}
};

/// One run of the batch tool, parsed from a key = value file.
struct RunConfig {
  // grid
  int nx = 63;
  double T = 2.5;
  double omega_lo = 0.2;
  double omega_hi = 0.8;
  double cfl = 0.9;
  // nonlinearity: builtin family plus optional declared growth data
  std::string g_family = "zero";
  std::vector<double> g_params;
  std::optional<double> g_s, g_seminorm, g_alpha, g_beta;
  // initial and target states: "sine1 [amp]", "zero", "bump c w amp", "file path"
  std::vector<std::string> init_profile{"sine1"};
  std::vector<std::string> target_profile{"zero"};
  // method: lsq | picard | newton | variant | linear
  std::string method = "lsq";
  // solver knobs
  double m = 2.0;
  double tol_e = 1e-16;
  int max_iters = 50;
  double cg_tol = 1e-10;
  int cg_maxit = 1000;
  double ls_tol = 1e-4;
  bool spectral_filter = false;
  bool cg_diagonal_scaling = false;
  // contraction probe
  double probe_radius = 0.5;
  int probe_trials = 10;
  // bookkeeping
  unsigned long seed = 0;
  std::string output = "out";
  int snapshot_every = 0;
  // cartesian sweep lists, in declaration order: sweep.<key> = v1 v2 ...
  std::vector<std::pair<std::string, std::vector<std::string>>> sweeps;
};

/// Applies one key/value assignment; throws ValidationError on bad values.
void apply_entry(RunConfig& cfg, const std::string& key, const std::vector<std::string>& tokens);

/// Parses and validates a config file. ParseError carries the line number;
/// ValidationError names the offending field.
RunConfig parse_config(const std::string& path);

/// Cross-field checks shared by parse_config and sweep expansion.
void validate(const RunConfig& cfg);

}  // namespace wavectl::cli
