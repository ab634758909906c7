#include <iostream>

#include "CLI11.hpp"
#include "folilab/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Foliated Brownian motion experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  const char* commands[][2] = {
      {"check-geometry", "Check the geometric identities on a grid"},
      {"simulate", "Simulate paths and write CSV files"},
      {"lyapunov", "Estimate the Lyapunov sum three ways"},
      {"measure-action", "Test a candidate measure for total invariance"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Experiment config file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
    sub->add_option("--seed", seed, "Seed (overrides [sim] seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  CLI::App* chosen = app.get_subcommands().front();
  folilab::CommandOptions options;
  if (chosen->count("--out")) options.out_dir = out_dir;
  if (chosen->count("--seed")) options.seed = seed;
  return folilab::run_command(chosen->get_name(), config_path, options, std::cout, std::cerr);
}
