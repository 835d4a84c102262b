#include "cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace wavectl::cli {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// Tokenizes a value; commas and parentheses count as separators so that
// "bump(0.5,0.1,1.0)" and "bump 0.5 0.1 1.0" read the same.
std::vector<std::string> tokenize(const std::string& value) {
  std::string norm = value;
  for (char& c : norm)
    if (c == ',' || c == '(' || c == ')') c = ' ';
  std::istringstream iss(norm);
  std::vector<std::string> out;
  for (std::string tok; iss >> tok;) out.push_back(tok);
  return out;
}

double parse_real(const std::string& key, const std::string& tok) {
  try {
    size_t pos = 0;
    const double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(key, "expected a real number, got '" + tok + "'");
  }
}

long parse_int(const std::string& key, const std::string& tok) {
  try {
    size_t pos = 0;
    const long v = std::stol(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(key, "expected an integer, got '" + tok + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& tok) {
  if (tok == "on" || tok == "true" || tok == "1") return true;
  if (tok == "off" || tok == "false" || tok == "0") return false;
  throw ValidationError(key, "expected on/off, got '" + tok + "'");
}

const std::vector<std::string>& one(const std::string& key,
                                    const std::vector<std::string>& toks) {
  if (toks.size() != 1) throw ValidationError(key, "expected a single value");
  return toks;
}

const std::set<std::string> kMethods{"lsq", "picard", "newton", "variant", "linear"};
const std::set<std::string> kFamilies{"zero", "linear", "sine", "logsq"};
const std::set<std::string> kProfiles{"sine1", "zero", "bump", "file"};

}  // namespace

void apply_entry(RunConfig& cfg, const std::string& key, const std::vector<std::string>& toks) {
  if (toks.empty()) throw ValidationError(key, "missing value");
  if (key == "nx") {
    cfg.nx = int(parse_int(key, one(key, toks)[0]));
  } else if (key == "T" || key == "horizon") {
    cfg.T = parse_real(key, one(key, toks)[0]);
  } else if (key == "omega") {
    if (toks.size() != 2) throw ValidationError(key, "expected two endpoints");
    cfg.omega_lo = parse_real(key, toks[0]);
    cfg.omega_hi = parse_real(key, toks[1]);
  } else if (key == "cfl") {
    cfg.cfl = parse_real(key, one(key, toks)[0]);
  } else if (key == "nonlinearity") {
    cfg.g_family = toks[0];
    cfg.g_params.clear();
    for (size_t i = 1; i < toks.size(); ++i) cfg.g_params.push_back(parse_real(key, toks[i]));
  } else if (key == "g_param") {
    // sweep-friendly way to set the single family parameter
    cfg.g_params = {parse_real(key, one(key, toks)[0])};
  } else if (key == "g_s") {
    cfg.g_s = parse_real(key, one(key, toks)[0]);
  } else if (key == "g_seminorm") {
    cfg.g_seminorm = parse_real(key, one(key, toks)[0]);
  } else if (key == "g_alpha") {
    cfg.g_alpha = parse_real(key, one(key, toks)[0]);
  } else if (key == "g_beta") {
    cfg.g_beta = parse_real(key, one(key, toks)[0]);
  } else if (key == "init") {
    cfg.init_profile = toks;
  } else if (key == "target") {
    cfg.target_profile = toks;
  } else if (key == "method") {
    cfg.method = one(key, toks)[0];
  } else if (key == "m") {
    cfg.m = parse_real(key, one(key, toks)[0]);
  } else if (key == "tol_e") {
    cfg.tol_e = parse_real(key, one(key, toks)[0]);
  } else if (key == "max_iters") {
    cfg.max_iters = int(parse_int(key, one(key, toks)[0]));
  } else if (key == "cg_tol") {
    cfg.cg_tol = parse_real(key, one(key, toks)[0]);
  } else if (key == "cg_maxit") {
    cfg.cg_maxit = int(parse_int(key, one(key, toks)[0]));
  } else if (key == "ls_tol") {
    cfg.ls_tol = parse_real(key, one(key, toks)[0]);
  } else if (key == "spectral_filter") {
    cfg.spectral_filter = parse_bool(key, one(key, toks)[0]);
  } else if (key == "cg_diagonal_scaling") {
    cfg.cg_diagonal_scaling = parse_bool(key, one(key, toks)[0]);
  } else if (key == "probe_radius") {
    cfg.probe_radius = parse_real(key, one(key, toks)[0]);
  } else if (key == "probe_trials") {
    cfg.probe_trials = int(parse_int(key, one(key, toks)[0]));
  } else if (key == "seed") {
    cfg.seed = static_cast<unsigned long>(parse_int(key, one(key, toks)[0]));
  } else if (key == "output") {
    cfg.output = one(key, toks)[0];
  } else if (key == "snapshot_every") {
    cfg.snapshot_every = int(parse_int(key, one(key, toks)[0]));
  } else {
    throw ValidationError(key, "unknown key");
  }
}

void validate(const RunConfig& cfg) {
  if (cfg.nx < 4) throw ValidationError("nx", "need at least 4 interior nodes");
  if (!(cfg.T > 0)) throw ValidationError("T", "horizon must be positive");
  if (!(0 <= cfg.omega_lo && cfg.omega_lo < cfg.omega_hi && cfg.omega_hi <= 1))
    throw ValidationError("omega", "need 0 <= l1 < l2 <= 1");
  if (!(cfg.T > 2 * std::max(cfg.omega_lo, 1 - cfg.omega_hi)))
    throw ValidationError("T", "horizon below the controllability time of the window");
  if (!(cfg.cfl > 0 && cfg.cfl <= 0.95))
    throw ValidationError("cfl", "CFL target must lie in (0, 0.95]");
  if (!kFamilies.count(cfg.g_family)) {
    std::string families;
    for (const auto& f : kFamilies) families += (families.empty() ? "" : ", ") + f;
    throw ValidationError("nonlinearity", "unknown family '" + cfg.g_family +
                                              "'; builtins: " + families);
  }
  if (cfg.g_family != "zero" && cfg.g_params.size() != 1)
    throw ValidationError("nonlinearity", "family '" + cfg.g_family + "' takes one parameter");
  if (cfg.g_family == "zero" && !cfg.g_params.empty())
    throw ValidationError("nonlinearity", "family 'zero' takes no parameter");
  for (const auto* prof : {&cfg.init_profile, &cfg.target_profile}) {
    const std::string field = prof == &cfg.init_profile ? "init" : "target";
    if (prof->empty() || !kProfiles.count((*prof)[0]))
      throw ValidationError(field, "expected one of: sine1, zero, bump c w amp, file path");
    if ((*prof)[0] == "bump" && prof->size() != 4)
      throw ValidationError(field, "bump takes center, width, amplitude");
    if ((*prof)[0] == "file" && prof->size() != 2)
      throw ValidationError(field, "file takes a path");
    if ((*prof)[0] == "sine1" && prof->size() > 2)
      throw ValidationError(field, "sine1 takes an optional amplitude");
  }
  if (!kMethods.count(cfg.method)) {
    std::string methods;
    for (const auto& m : kMethods) methods += (methods.empty() ? "" : ", ") + m;
    throw ValidationError("method", "unknown method '" + cfg.method + "'; one of: " + methods);
  }
  if (!(cfg.m >= 1)) throw ValidationError("m", "line-search cap must satisfy m >= 1");
  if (!(cfg.tol_e > 0)) throw ValidationError("tol_e", "must be positive");
  if (cfg.max_iters < 1) throw ValidationError("max_iters", "must be positive");
  if (!(cfg.cg_tol > 0)) throw ValidationError("cg_tol", "must be positive");
  if (cfg.cg_maxit < 1) throw ValidationError("cg_maxit", "must be positive");
  if (!(cfg.ls_tol > 0)) throw ValidationError("ls_tol", "must be positive");
  if (cfg.probe_trials < 1) throw ValidationError("probe_trials", "must be positive");
  if (!(cfg.probe_radius > 0)) throw ValidationError("probe_radius", "must be positive");
  if (cfg.snapshot_every < 0) throw ValidationError("snapshot_every", "must be nonnegative");
  if (cfg.output.empty()) throw ValidationError("output", "must not be empty");
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config", "cannot open '" + path + "'");
  RunConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError(lineno, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError(lineno, "empty key");
    if (value.empty()) throw ParseError(lineno, "missing value for '" + key + "'");
    try {
      if (key.rfind("sweep.", 0) == 0) {
        const std::string base = key.substr(6);
        if (base.empty()) throw ParseError(lineno, "empty sweep key");
        cfg.sweeps.emplace_back(base, tokenize(value));
      } else {
        apply_entry(cfg, key, tokenize(value));
      }
    } catch (const ValidationError& e) {
      throw ValidationError(e.field, std::string(e.what()) + " (line " +
                                         std::to_string(lineno) + ")");
    }
  }
  // sweep keys must be assignable; probe each with its first value
  for (const auto& [key, values] : cfg.sweeps) {
    if (values.empty()) throw ValidationError("sweep." + key, "empty list");
    RunConfig probe = cfg;
    probe.sweeps.clear();
    apply_entry(probe, key, {values[0]});
  }
  if (cfg.sweeps.empty()) validate(cfg);
  return cfg;
}

}  // namespace wavectl::cli
