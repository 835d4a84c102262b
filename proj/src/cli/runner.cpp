#include "cli/runner.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "wavectl/version.hpp"

namespace wavectl::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

uint64_t fnv1a(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string grid_hash(const DiscreteSetup<double>& s) {
  std::string repr = std::to_string(s.nx) + ";" + std::to_string(s.nt) + ";" + fmt(s.T) + ";" +
                     fmt(s.omega.lo) + ";" + fmt(s.omega.hi) + ";" + fmt(s.cfl);
  for (int i = 0; i < s.nx; ++i) repr += ";" + fmt(s.omega_mask[i]);
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", (unsigned long long)fnv1a(repr));
  return buf;
}

json config_echo(const RunConfig& c) {
  json j;
  j["nx"] = c.nx;
  j["T"] = c.T;
  j["omega"] = {c.omega_lo, c.omega_hi};
  j["cfl"] = c.cfl;
  j["nonlinearity"] = c.g_family;
  j["g_params"] = c.g_params;
  j["init"] = c.init_profile;
  j["target"] = c.target_profile;
  j["method"] = c.method;
  j["m"] = c.m;
  j["tol_e"] = c.tol_e;
  j["max_iters"] = c.max_iters;
  j["cg_tol"] = c.cg_tol;
  j["cg_maxit"] = c.cg_maxit;
  j["ls_tol"] = c.ls_tol;
  j["spectral_filter"] = c.spectral_filter;
  j["cg_diagonal_scaling"] = c.cg_diagonal_scaling;
  j["seed"] = c.seed;
  j["snapshot_every"] = c.snapshot_every;
  return j;
}

void write_manifest(const fs::path& dir, const RunConfig& cfg, const DiscreteSetup<double>& s,
                    const std::string& status, double final_E, double final_deviation,
                    const std::string& started, double wall_seconds,
                    const std::vector<std::string>& warnings, const json& extra = {}) {
  json j;
  j["config"] = config_echo(cfg);
  j["versions"] = {{"wavectl", WAVECTL_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)}};
  j["grid"] = {{"nx", s.nx}, {"nt", s.nt}, {"dx", s.dx}, {"dt", s.dt}, {"cfl", s.cfl},
               {"hash", grid_hash(s)}};
  j["started"] = started;
  j["finished"] = iso_now();
  j["status"] = status;
  j["final_E"] = final_E;
  j["final_deviation"] = final_deviation;
  j["wall_seconds"] = wall_seconds;
  j["warnings"] = warnings;
  if (!extra.is_null()) j["report"] = extra;
  const fs::path tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(tmp);
    out << j.dump(2) << "\n";
  }
  fs::rename(tmp, dir / "manifest.json");
}

constexpr const char* kIterHeader = "k,E,lambda,dir_norm,y_inf,deriv_err,cg_iters,cg_res";

void write_iterations(const fs::path& dir, const std::vector<IterationRecord<double>>& records,
                      const std::string& method = "") {
  std::ofstream out(dir / "iterations.csv");
  out << kIterHeader << (method.empty() ? "" : ",method") << "\n";
  for (const auto& r : records) {
    out << r.k << "," << fmt(r.E) << "," << fmt(r.lambda) << "," << fmt(r.dir_norm) << ","
        << fmt(r.y_inf) << "," << fmt(r.deriv_err) << "," << r.cg_iters << "," << fmt(r.cg_res);
    if (!method.empty()) out << "," << method;
    out << "\n";
  }
}

void write_snapshot(const fs::path& dir, int k, const DiscreteSetup<double>& s,
                    const ControlledPair<double>& pair) {
  char name[32];
  std::snprintf(name, sizeof(name), "snapshot_k%04d.csv", k);
  std::ofstream out(dir / name);
  out << "x,y,f\n";
  for (int n = 0; n <= s.nt; ++n)
    for (int i = 0; i < s.nx; ++i)
      out << fmt(s.node(i)) << "," << fmt(pair.y(i, n)) << "," << fmt(pair.f(i, n)) << "\n";
}

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

}  // namespace

fs::path resolve_output(const RunConfig& cfg) {
  fs::path out = cfg.output;
  if (const char* root = std::getenv("WAVECTL_OUTPUT_ROOT"); root && out.is_relative())
    out = fs::path(root) / out;
  return out;
}

DiscreteSetup<double> make_setup(const RunConfig& cfg) {
  return build_setup<double>(cfg.nx, cfg.T, {cfg.omega_lo, cfg.omega_hi}, cfg.cfl);
}

Nonlinearity<double> make_nonlinearity(const RunConfig& cfg) {
  Nonlinearity<double> nl;
  if (cfg.g_family == "zero") {
    nl = nl_zero();
  } else if (cfg.g_family == "linear") {
    nl = nl_linear(cfg.g_params.at(0));
  } else if (cfg.g_family == "sine") {
    nl = nl_sine(cfg.g_params.at(0));
  } else if (cfg.g_family == "logsq") {
    nl = nl_logsq(cfg.g_params.at(0));
  } else {
    throw ValidationError("nonlinearity", "unknown family '" + cfg.g_family + "'");
  }
  if (cfg.g_s) nl.s = *cfg.g_s;
  if (cfg.g_seminorm) nl.holder_seminorm = *cfg.g_seminorm;
  if (cfg.g_alpha) nl.growth_alpha = *cfg.g_alpha;
  if (cfg.g_beta) nl.growth_beta = *cfg.g_beta;
  return nl;
}

StateSlice<double> make_state(const RunConfig&, const std::vector<std::string>& profile,
                              const DiscreteSetup<double>& s, const std::string& field) {
  StateSlice<double> st = zero_state(s);
  const std::string& kind = profile.at(0);
  if (kind == "zero") return st;
  if (kind == "sine1") {
    const double amp = profile.size() > 1 ? std::stod(profile[1]) : 1.0;
    for (int i = 0; i < s.nx; ++i) st.position[i] = amp * std::sin(EIGEN_PI * s.node(i));
    return st;
  }
  if (kind == "bump") {
    const double c = std::stod(profile.at(1));
    const double w = std::stod(profile.at(2));
    const double amp = std::stod(profile.at(3));
    if (!(w > 0)) throw ValidationError(field, "bump width must be positive");
    for (int i = 0; i < s.nx; ++i) {
      const double r = (s.node(i) - c) / w;
      if (std::abs(r) < 1.0) {
        const double cosv = std::cos(EIGEN_PI * r / 2);
        st.position[i] = amp * cosv * cosv;
      }
    }
    return st;
  }
  if (kind == "file") {
    std::ifstream in(profile.at(1));
    if (!in) throw ValidationError(field, "cannot open '" + profile.at(1) + "'");
    for (int i = 0; i < s.nx; ++i) {
      if (!(in >> st.position[i] >> st.velocity[i]))
        throw ValidationError(field, "expected " + std::to_string(s.nx) +
                                         " 'position velocity' rows in '" + profile.at(1) + "'");
    }
    double spare;
    if (in >> spare)
      throw ValidationError(field, "'" + profile.at(1) + "' has more rows than nodes");
    return st;
  }
  throw ValidationError(field, "unknown profile '" + kind + "'");
}

namespace {

SolverConfig<double> make_solver_config(const RunConfig& cfg) {
  SolverConfig<double> sc;
  sc.m = cfg.m;
  sc.tol_E_factor = cfg.tol_e;
  sc.max_iters = cfg.max_iters;
  sc.cg_tol = cfg.cg_tol;
  sc.cg_maxit = cfg.cg_maxit;
  sc.ls_tol = cfg.ls_tol;
  sc.spectral_filter = cfg.spectral_filter;
  sc.cg_diagonal_scaling = cfg.cg_diagonal_scaling;
  return sc;
}

int run_lsq(const RunConfig& cfg, const fs::path& dir, const DiscreteSetup<double>& s,
            const std::string& started, const Timer& timer) {
  const auto nl = make_nonlinearity(cfg);
  const auto init = make_state(cfg, cfg.init_profile, s, "init");
  const auto target = make_state(cfg, cfg.target_profile, s, "target");
  const auto sc = make_solver_config(cfg);
  IterationObserver<double> observer;
  if (cfg.snapshot_every > 0) {
    observer = [&](int k, const ControlledPair<double>& pair) {
      if (k % cfg.snapshot_every == 0) write_snapshot(dir, k, s, pair);
    };
  }
  const auto res = wavectl::solve(s, nl, init, target, sc, observer);
  write_iterations(dir, res.records);
  json extra;
  extra["E0"] = res.E0;
  extra["tol_E"] = res.tol_E;
  extra["M_obs"] = res.M_obs;
  extra["iterations"] = res.records.size();
  if (!res.records.empty()) {
    std::vector<double> E_seq;
    for (const auto& r : res.records) E_seq.push_back(r.E);
    E_seq.push_back(res.final_E);
    extra["convergence_orders"] = convergence_order(E_seq);
    const auto decay = decay_bound_check(s, res.records, res.final_E, nl, sc.m);
    extra["C_emp"] = decay.C_emp;
    extra["decay_c"] = decay.c;
    extra["decay_bound_holds"] = decay.all_hold;
    const auto pred = predict_constants(nl, decay.C_emp, res.E0, res.M_obs);
    extra["predicted_c"] = pred.c;
    if (pred.k0) extra["predicted_k0"] = *pred.k0;
    const auto pair0 = make_initial_pair(s, nl, init, target, sc);
    extra["dual_norm_lower_bound_at_start"] =
        dual_norm_lower_bound(s, pair0, sc, 3, cfg.seed + 1);
  }
  write_manifest(dir, cfg, s, to_string(res.status), res.final_E, res.replay_deviation, started,
                 timer.seconds(), res.warnings, extra);
  return res.status == SolveStatus::Converged ? kExitOk : kExitDiverged;
}

int run_linear(const RunConfig& cfg, const fs::path& dir, const DiscreteSetup<double>& s,
               const std::string& started, const Timer& timer) {
  const auto init = make_state(cfg, cfg.init_profile, s, "init");
  const auto target = make_state(cfg, cfg.target_profile, s, "target");
  const CgOptions<double> opt{cfg.cg_tol, cfg.cg_maxit, cfg.cg_diagonal_scaling,
                              cfg.spectral_filter};
  const auto sol = steer(s, zero_field(s), zero_field(s), init, target, opt);
  IterationRecord<double> rec;
  rec.k = 0;
  rec.E = 0;
  rec.lambda = 1;
  rec.y_inf = sol.trajectory.cwiseAbs().maxCoeff();
  rec.cg_iters = sol.cg.iters;
  rec.cg_res = sol.cg.residual;
  write_iterations(dir, {rec});
  write_manifest(dir, cfg, s, "converged", 0.0, sol.final_deviation, started, timer.seconds(), {});
  return kExitOk;
}

int run_baseline(const RunConfig& cfg, const fs::path& dir, const DiscreteSetup<double>& s,
                 const std::string& started, const Timer& timer) {
  const auto nl = make_nonlinearity(cfg);
  const auto init = make_state(cfg, cfg.init_profile, s, "init");
  const auto target = make_state(cfg, cfg.target_profile, s, "target");
  const auto sc = make_solver_config(cfg);
  IterationObserver<double> observer;
  if (cfg.snapshot_every > 0) {
    observer = [&](int k, const ControlledPair<double>& pair) {
      if (k % cfg.snapshot_every == 0) write_snapshot(dir, k, s, pair);
    };
  }
  BaselineRun<double> run;
  if (cfg.method == "picard") {
    run = picard_iterate(s, nl, init, target, sc, observer);
  } else if (cfg.method == "newton") {
    run = newton_iterate(s, nl, init, target, sc, observer);
  } else {
    run = variant_iterate(s, nl, init, target, sc, observer);
  }
  write_iterations(dir, run.records, cfg.method);
  double deviation = -1;
  if (run.status == BaselineStatus::Converged)
    deviation = v_norm(s, StateSlice<double>{run.pair.final.position - target.position,
                                             run.pair.final.velocity - target.velocity});
  write_manifest(dir, cfg, s, to_string(run.status), run.final_E, deviation, started,
                 timer.seconds(), {});
  return run.status == BaselineStatus::Converged ? kExitOk : kExitDiverged;
}

}  // namespace

int run(const RunConfig& cfg, const fs::path& dir) {
  validate(cfg);
  const Timer timer;
  const std::string started = iso_now();
  fs::create_directories(dir);
  const auto s = make_setup(cfg);
  try {
    if (cfg.method == "lsq") return run_lsq(cfg, dir, s, started, timer);
    if (cfg.method == "linear") return run_linear(cfg, dir, s, started, timer);
    return run_baseline(cfg, dir, s, started, timer);
  } catch (const ConvergenceError& e) {
    write_manifest(dir, cfg, s, "subproblem_failed", -1, -1, started, timer.seconds(),
                   {e.what()});
    return kExitSubproblem;
  } catch (const StabilityError& e) {
    write_manifest(dir, cfg, s, "blow_up", -1, -1, started, timer.seconds(), {e.what()});
    return kExitDiverged;
  }
}

int sweep(const RunConfig& cfg, const fs::path& dir) {
  if (cfg.sweeps.empty()) {
    // a sweep without lists is a single run
    fs::create_directories(dir);
    std::ofstream summary(dir / "summary.csv");
    summary << "run,status,exit,final_E,final_deviation\n";
    const int code = run(cfg, dir / "run_0000");
    std::ifstream m(dir / "run_0000" / "manifest.json");
    json j = json::parse(m);
    summary << "0," << j["status"].get<std::string>() << "," << code << ","
            << fmt(j["final_E"].get<double>()) << ","
            << fmt(j["final_deviation"].get<double>()) << "\n";
    return code;
  }

  std::vector<size_t> radix(cfg.sweeps.size());
  size_t total = 1;
  for (size_t i = 0; i < cfg.sweeps.size(); ++i) {
    radix[i] = cfg.sweeps[i].second.size();
    total *= radix[i];
  }
  fs::create_directories(dir);
  std::ofstream summary(dir / "summary.csv");
  summary << "run";
  for (const auto& [key, _] : cfg.sweeps) summary << "," << key;
  summary << ",status,exit,final_E,final_deviation\n";

  int worst = kExitOk;
  for (size_t idx = 0; idx < total; ++idx) {
    RunConfig one = cfg;
    one.sweeps.clear();
    size_t rem = idx;
    std::vector<std::string> chosen;
    // lexicographic over declaration order: last key varies fastest
    for (size_t i = cfg.sweeps.size(); i-- > 0;) {
      const auto& [key, values] = cfg.sweeps[i];
      chosen.insert(chosen.begin(), values[rem % radix[i]]);
      rem /= radix[i];
    }
    for (size_t i = 0; i < cfg.sweeps.size(); ++i)
      apply_entry(one, cfg.sweeps[i].first, {chosen[i]});
    char sub[32];
    std::snprintf(sub, sizeof(sub), "run_%04u", unsigned(idx));
    int code;
    std::string status = "config_error";
    double final_E = -1, final_dev = -1;
    try {
      code = run(one, dir / sub);
      std::ifstream m(dir / sub / "manifest.json");
      json j = json::parse(m);
      status = j["status"].get<std::string>();
      final_E = j["final_E"].get<double>();
      final_dev = j["final_deviation"].get<double>();
    } catch (const ValidationError&) {
      code = kExitConfig;
    }
    worst = std::max(worst, code);
    summary << idx;
    for (const auto& c : chosen) summary << "," << c;
    summary << "," << status << "," << code << "," << fmt(final_E) << "," << fmt(final_dev)
            << "\n";
  }
  return worst;
}

int probe_contraction(const RunConfig& cfg, const fs::path& dir) {
  validate(cfg);
  const Timer timer;
  const std::string started = iso_now();
  fs::create_directories(dir);
  const auto s = make_setup(cfg);
  const auto nl = make_nonlinearity(cfg);
  const auto init = make_state(cfg, cfg.init_profile, s, "init");
  const auto target = make_state(cfg, cfg.target_profile, s, "target");
  const CgOptions<double> opt{cfg.cg_tol, cfg.cg_maxit, cfg.cg_diagonal_scaling, false};
  try {
    const auto rep =
        contraction_probe(s, nl, init, target, cfg.probe_radius, cfg.probe_trials, cfg.seed, opt);
    {
      std::ofstream out(dir / "probe.csv");
      out << "trial,xi_gap,k_gap,ratio,ghat_gap\n";
      for (size_t t = 0; t < rep.samples.size(); ++t) {
        const auto& p = rep.samples[t];
        out << t << "," << fmt(p.xi_gap) << "," << fmt(p.k_gap) << "," << fmt(p.ratio) << ","
            << fmt(p.ghat_gap) << "\n";
      }
    }
    json extra;
    extra["rho_max"] = rep.rho_max;
    extra["gap_slope"] = rep.slope;
    extra["contracting"] = rep.rho_max < 1.0;
    write_manifest(dir, cfg, s, "converged", -1, -1, started, timer.seconds(), {}, extra);
    return kExitOk;
  } catch (const ConvergenceError& e) {
    write_manifest(dir, cfg, s, "subproblem_failed", -1, -1, started, timer.seconds(),
                   {e.what()});
    return kExitSubproblem;
  }
}

int check(const RunConfig& cfg) {
  validate(cfg);
  const auto s = make_setup(cfg);
  const auto nl = make_nonlinearity(cfg);
  make_state(cfg, cfg.init_profile, s, "init");
  make_state(cfg, cfg.target_profile, s, "target");
  std::cout << "config ok: method=" << cfg.method << " nonlinearity=" << nl.name
            << " grid nx=" << s.nx << " nt=" << s.nt << " dt=" << s.dt << " cfl=" << s.cfl
            << " hash=" << grid_hash(s) << "\n";
  if (!cfg.sweeps.empty()) {
    size_t total = 1;
    for (const auto& [_, values] : cfg.sweeps) total *= values.size();
    std::cout << "sweep: " << total << " runs\n";
  }
  return kExitOk;
}

}  // namespace wavectl::cli
