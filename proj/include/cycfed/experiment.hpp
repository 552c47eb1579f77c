#pragma once

#include <memory>
#include <string>

#include "cycfed/config.hpp"
#include "cycfed/datasets.hpp"
#include "cycfed/engine.hpp"
#include "cycfed/quadratic.hpp"

namespace cycfed {

// A config instantiated into runnable pieces. Overrides come from sweep
// cells or command-line flags.
struct Experiment {
  std::shared_ptr<const Population> population;
  std::shared_ptr<const CycleSchedule> schedule;
  RunConfig run_config;
  StepSize step;           // filled when eta = "theorem"
  bool eta_from_theorem = false;
  int k_bar = 1;
  int total_rounds = 0;
};

struct Overrides {
  int k_bar = -1;           // -1 -> config value
  int total_rounds = -1;    // -1 -> cycles * k_bar from config
  long long seed = -1;      // -1 -> config value
};

Experiment build_experiment(const ExperimentConfig& cfg, const Overrides& ov = {});

// Executes one run and writes runlog.csv + summary.txt under out_dir.
// Returns the process exit code contract of the run command: 0 success,
// 2 divergence guard.
int execute_run(const ExperimentConfig& cfg, const std::string& out_dir);

// Cartesian product of the sweep lists and seeds; one runlog per cell under
// out_dir/cells/, aggregated per non-seed combination into sweep.csv
// (mean/min/max of the final loss gap over the seed axis). Cells execute on
// up to `jobs` worker threads. Returns 0 if at least one cell succeeded.
int execute_sweep(const ExperimentConfig& cfg, const std::string& out_dir, int jobs);

}  // namespace cycfed
