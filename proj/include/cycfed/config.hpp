#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace cycfed {

// Config parse/validation failure with a line diagnostic.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(int line, const std::string& msg)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line(line) {}
  int line;
};

// Experiment description, one population block plus schedule/run/sweep/output
// blocks. The text format is a TOML-like subset documented in docs/config.md;
// unknown tables or keys are hard errors.
struct ExperimentConfig {
  // [population]
  std::string kind = "quadratic";  // "quadratic" | "dataset"
  std::uint64_t population_seed = 0;
  int clients = 1;   // M
  int k_bar = 1;     // groups per cycle
  int components = 1;  // B
  // quadratic
  int dim = 2;
  double gamma = 0.0;
  double alpha = 0.0;
  double nu_bar = 0.0;
  std::vector<double> spectrum;  // empty -> all ones
  double hessian_jitter = 0.0;
  // dataset
  int classes = 2;
  int samples = 100;
  double separation = 1.0;
  double concentration = 1.0;
  double l2 = 1e-3;
  std::string grouping = "label-sorted";  // "label-sorted" | "random"

  // [schedule]
  std::string order = "identity";  // "identity" | "shuffled"
  std::uint64_t order_seed = 0;

  // [run]
  std::string mode = "GD";
  int cycles = 1;  // K
  int clients_per_round = 1;
  bool eta_theorem = false;
  double eta = 0.1;
  int tau = 1;
  int minibatch = 1;
  std::uint64_t run_seed = 0;
  bool record_iterates = false;
  double init_scale = 0.0;  // 0 -> zero init, else scale * seeded unit direction

  // [sweep] (optional)
  bool has_sweep = false;
  std::vector<int> sweep_k_bar;
  std::vector<int> sweep_rounds;  // total rounds T per cell
  std::vector<std::uint64_t> sweep_seeds;

  // [output]
  std::string out_dir;
  bool export_shards = false;  // dataset populations: write shards.csv
};

ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

// Canonical form; parse(serialize(parse(x))) == parse(x).
std::string serialize_config(const ExperimentConfig& cfg);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace cycfed
