#include <iostream>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/runner.hpp"
#include "wavectl/version.hpp"

using namespace wavectl::cli;

int main(int argc, char** argv) {
  CLI::App app{"wavectl - exact controls for semilinear 1D wave equations"};
  app.set_version_flag("--version", WAVECTL_VERSION);
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "config file (key = value)")->required();
    sub->add_option("-o,--output", output_override, "override the output directory");
  };
  auto* cmd_solve = app.add_subcommand("solve", "run the configured method once");
  auto* cmd_sweep = app.add_subcommand("sweep", "cartesian sweep over sweep.* lists");
  auto* cmd_probe = app.add_subcommand("probe-contraction",
                                       "sample the Lipschitz behaviour of the Picard operator");
  auto* cmd_check = app.add_subcommand("check", "validate a config without running");
  for (auto* sub : {cmd_solve, cmd_sweep, cmd_probe, cmd_check}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = parse_config(config_path);
    if (!output_override.empty()) cfg.output = output_override;
    const auto dir = resolve_output(cfg);
    if (cmd_solve->parsed()) {
      if (!cfg.sweeps.empty())
        throw ValidationError("sweep", "config declares sweep lists; use the sweep command");
      return run(cfg, dir);
    }
    if (cmd_sweep->parsed()) return sweep(cfg, dir);
    if (cmd_probe->parsed()) {
      if (!cfg.sweeps.empty())
        throw ValidationError("sweep", "probe-contraction does not sweep");
      return probe_contraction(cfg, dir);
    }
    return check(cfg);
  } catch (const ParseError& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ValidationError& e) {
    std::cerr << "config validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const wavectl::GeometryError& e) {
    std::cerr << "config validation error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  }
}
