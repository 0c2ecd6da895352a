#pragma once

// Experiment orchestration behind the `nape` executable.
//
// Exit codes: 0 every enabled check passed, 1 some check failed,
// 2 configuration or command-line error, 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nape/config.hpp"
#include "nape/report.hpp"

namespace nape {

struct RunOptions {
  std::filesystem::path out;            // empty: the config's output directory
  std::optional<std::uint64_t> seed;    // overrides the measures and mc seeds
  int refine = 0;
  bool parallel = false;
};

/// Runs `experiments` (names from experiment_names()) and writes
/// report.json, timing.json and the per-experiment artifacts.
RunReport run_experiments(const ExperimentConfig& config, const std::vector<std::string>& experiments,
                          const RunOptions& options, const std::string& subcommand);

/// Entry point of the executable; returns the exit code.
int run_cli(int argc, char** argv);

}  // namespace nape
