#pragma once

// Batch commands behind the CLI. Each writes plot-ready CSVs and a
// summary.json into the output directory and returns a RunReport.
//
// Exit codes: 0 all tolerances met, 2 config error, 3 solver non-convergence
// (or a failed check), 4 infeasible scenario.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gridce/scenarios.hpp"

namespace gridce {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitSolver = 3, kExitInfeasible = 4 };

struct RunOptions {
    std::filesystem::path config;
    std::filesystem::path out_dir = "out";
    ConfigOverrides overrides;
    int threads = 0;
};

struct RunReport {
    std::string command;
    std::string config_path;
    std::string version = kVersion;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
    int exit_code = kExitOk;
    std::vector<std::string> outputs;                       // files written, relative to out_dir
    std::vector<std::pair<std::string, double>> metrics;    // headline numbers, in insertion order
    std::vector<std::string> diagnostics;

    double metric(const std::string& name) const;           // throws if absent
    std::string to_json() const;
    std::string to_text() const;
};

RunReport cmd_cpp(const RunOptions& opts);
RunReport cmd_equilibrium(const RunOptions& opts);
RunReport cmd_ensemble(const RunOptions& opts);

// Runs the invariant suite on small instances; one line per check in
// `diagnostics`, exit code 3 if any check fails.
RunReport cmd_verify(const RunOptions& opts);

// Maps a library exception to the exit-code contract.
int exit_code_for(const std::exception& e);

}  // namespace gridce
