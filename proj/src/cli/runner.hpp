#pragma once

#include <filesystem>
#include <string>

#include "cli/config.hpp"
#include "wavectl/baselines.hpp"
#include "wavectl/lsq.hpp"

namespace wavectl::cli {

// Exit codes of the batch tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitSubproblem = 2;  // inner control solve failed
inline constexpr int kExitDiverged = 3;    // method did not converge
inline constexpr int kExitConfig = 4;

/// Output root: the config's output directory, resolved against the
/// WAVECTL_OUTPUT_ROOT environment variable when that is set and the
/// configured path is relative.
std::filesystem::path resolve_output(const RunConfig& cfg);

DiscreteSetup<double> make_setup(const RunConfig& cfg);
Nonlinearity<double> make_nonlinearity(const RunConfig& cfg);
StateSlice<double> make_state(const RunConfig& cfg, const std::vector<std::string>& profile,
                              const DiscreteSetup<double>& setup, const std::string& field);

/// Executes one run into `dir`: iterations.csv, manifest.json and optional
/// snapshots. Returns the exit code.
int run(const RunConfig& cfg, const std::filesystem::path& dir);

/// Cartesian sweep over the declared lists; one subdirectory per run plus
/// a summary.csv. Returns the worst exit code.
int sweep(const RunConfig& cfg, const std::filesystem::path& dir);

/// Contraction probe of the Picard operator; writes probe.csv + manifest.
int probe_contraction(const RunConfig& cfg, const std::filesystem::path& dir);

/// Dry-run validation; prints the resolved grid.
int check(const RunConfig& cfg);

}  // namespace wavectl::cli
