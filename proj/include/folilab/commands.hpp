#pragma once

// The four experiment commands. Each returns its exit code (0 pass, 1 tolerance
// failure) and the JSON report it wrote; configuration problems surface as
// Error(config) and map to exit code 2 in run_command.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "folilab/config.hpp"
#include "json.hpp"

namespace folilab {

struct CommandOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
};

struct CommandResult {
  int exit_code = 0;
  nlohmann::ordered_json report;
};

ExperimentConfig with_overrides(ExperimentConfig config, const CommandOptions& options);

CommandResult cmd_check_geometry(const ExperimentConfig& config, std::ostream& log);
CommandResult cmd_simulate(const ExperimentConfig& config, std::ostream& log);
CommandResult cmd_lyapunov(const ExperimentConfig& config, std::ostream& log);
CommandResult cmd_measure_action(const ExperimentConfig& config, std::ostream& log);

/// Loads the config, applies overrides, runs the named command and maps errors to exit codes.
int run_command(const std::string& command, const std::string& config_path, const CommandOptions& options,
                std::ostream& log, std::ostream& err);

/// Path CSV: t, x_1..x_d, logdet_full, logdet_leaf; the first row is the start point.
std::string path_csv(const PathRecord& path);
/// One row per cell: cell, angle_1..angle_d (cell centers), mass.
std::string occupation_csv(const OccupationHistogram& histogram);

}  // namespace folilab
