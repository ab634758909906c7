#pragma once

// Experiment configuration: an INI file with fixed sections and keys.
//
//   [model]   name, plus model parameters (alpha; R, r)
//   [sim]     dt, T, n_paths, seed, record_every, burn_in, track_logdet, init, x0
//   [drift]   kind (none | leaf_constant), c
//   [grid]    dims
//   [tests]   set
//   [check]   tolerance, points, h_first, h_nested
//   [measure] candidate (lebesgue | bump), particles, t, s, seeds, bump_width
//   [output]  dir
//
// Lists are whitespace separated. Unknown sections or keys are errors.

#include <cstdint>
#include <string>
#include <vector>

#include "folilab/ergodic.hpp"
#include "folilab/model.hpp"
#include "folilab/sde.hpp"

namespace folilab {

struct CheckSettings {
  double tolerance = 1e-5;
  int points = 100;  // minimum number of grid points
  double h_first = 1e-5;
  double h_nested = 1e-4;
};

struct MeasureSettings {
  CandidateMeasure candidate = CandidateMeasure::lebesgue;
  long particles = 100000;
  double t = 1.0;
  double s = 1.0;
  std::vector<std::uint64_t> seeds;  // empty: seed, seed + 1, seed + 2
  double bump_width = 0.2;
};

struct ExperimentConfig {
  std::string model_name = "circle";
  ModelParams params;
  SimConfig sim;
  double burn_in = 0.1;
  std::vector<int> grid;  // empty: 32 cells per chart coordinate
  std::string test_set = "trig";
  CheckSettings check;
  MeasureSettings measure;
  std::string output_dir = "out";

  FoliatedModel model() const;
  std::vector<int> grid_dims() const;
  std::vector<std::uint64_t> measure_seeds() const;
  /// Throws Error(config) describing the first invalid field.
  void validate() const;
};

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
/// Canonical text form; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace folilab
