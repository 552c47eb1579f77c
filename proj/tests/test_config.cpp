#include <cmath>
#include "cycfed/config.hpp"
#include "cycfed/experiment.hpp"
#include "doctest.h"

using namespace cycfed;

namespace {

const char* kMinimalQuadratic = R"(
# minimal quadratic GD run
[population]
kind = "quadratic"
dim = 4
clients = 12
k_bar = 3
gamma = 0.5
alpha = 0.2
seed = 7

[run]
mode = "GD"
cycles = 10
clients_per_round = 2
eta = 0.05
seed = 1
)";

}  // namespace

TEST_CASE("parse -> serialize -> parse is a fixed point") {
  const ExperimentConfig a = parse_config_text(kMinimalQuadratic);
  const std::string s1 = serialize_config(a);
  const ExperimentConfig b = parse_config_text(s1);
  CHECK(a == b);
  CHECK(serialize_config(b) == s1);
}

TEST_CASE("unknown keys and tables are hard errors with line numbers") {
  CHECK_THROWS_AS(parse_config_text("[population]\nkind = \"quadratic\"\ntypo_key = 3\n"
                                    "[run]\ncycles = 1\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse_config_text("[nonsense]\nx = 1\n"), ConfigError);
  try {
    parse_config_text("[population]\nkind = \"quadratic\"\nbad = 1\n[run]\ncycles = 1\n");
    CHECK(false);
  } catch (const ConfigError& e) {
    CHECK(e.line == 3);
  }
}

TEST_CASE("type errors and malformed values are rejected") {
  CHECK_THROWS(parse_config_text("[population]\nkind = 3\n[run]\ncycles = 1\n"));
  CHECK_THROWS(parse_config_text("[population]\nclients = \"many\"\n[run]\ncycles = 1\n"));
  CHECK_THROWS(parse_config_text("[population]\nkind = \"quadratic\"\n[run]\ncycles = 1.5\n"));
  CHECK_THROWS(parse_config_text("[population]\nkind\n[run]\ncycles = 1\n"));
  CHECK_THROWS(parse_config_text("key_outside_table = 1\n"));
  CHECK_THROWS(parse_config_text("[population]\nkind = \"quadratic\"\nkind = \"dataset\"\n"));
  CHECK_THROWS(parse_config_text("[run]\ncycles = 1\n"));  // missing population block
}

TEST_CASE("structural validation: k_bar divides clients, N within group size") {
  CHECK_THROWS(parse_config_text(
      "[population]\nkind = \"quadratic\"\nclients = 10\nk_bar = 3\n[run]\ncycles = 1\n"));
  CHECK_THROWS(parse_config_text(
      "[population]\nkind = \"quadratic\"\nclients = 12\nk_bar = 3\n"
      "[run]\ncycles = 1\nclients_per_round = 5\n"));
}

TEST_CASE("eta accepts a number or the string theorem") {
  ExperimentConfig cfg = parse_config_text(
      "[population]\nkind = \"quadratic\"\ndim = 4\nclients = 12\nk_bar = 3\n"
      "[run]\nmode = \"GD\"\ncycles = 10\nclients_per_round = 2\neta = \"theorem\"\n");
  CHECK(cfg.eta_theorem);
  CHECK_THROWS(parse_config_text(
      "[population]\nkind = \"quadratic\"\n[run]\ncycles = 1\neta = \"magic\"\n"));
}

TEST_CASE("sweep block round-trips and builds the expected cell grid") {
  ExperimentConfig cfg = parse_config_text(
      "[population]\nkind = \"quadratic\"\ndim = 4\nclients = 12\nk_bar = 3\ngamma = 0.5\n"
      "[run]\nmode = \"GD\"\ncycles = 4\nclients_per_round = 2\neta = 0.02\n"
      "[sweep]\nk_bar = [1, 2, 3, 6]\nseeds = [1, 2, 3]\n");
  CHECK(cfg.has_sweep);
  CHECK(cfg.sweep_k_bar.size() == 4);
  CHECK(cfg.sweep_seeds.size() == 3);  // 12 cells in total
  const ExperimentConfig back = parse_config_text(serialize_config(cfg));
  CHECK(back == cfg);
}

TEST_CASE("build_experiment resolves theorem step size and records the conversion") {
  ExperimentConfig cfg = parse_config_text(
      "[population]\nkind = \"quadratic\"\ndim = 4\nclients = 12\nk_bar = 3\n"
      "spectrum = [1.0, 1.2, 1.5, 2.0]\n"
      "[run]\nmode = \"GD\"\ncycles = 100\nclients_per_round = 2\neta = \"theorem\"\n");
  const Experiment ex = build_experiment(cfg);
  CHECK(ex.eta_from_theorem);
  CHECK(ex.run_config.eta == doctest::Approx(2.0 * ex.step.eta_theorem));
  CHECK(ex.total_rounds == 300);

  Overrides ov;
  ov.k_bar = 6;
  ov.total_rounds = 600;
  const Experiment swept = build_experiment(cfg, ov);
  CHECK(swept.k_bar == 6);
  CHECK(swept.run_config.cycles == 100);

  Overrides bad;
  bad.k_bar = 5;  // does not divide 12
  CHECK_THROWS_AS(build_experiment(cfg, bad), ConfigError);
}

TEST_CASE("theorem step size resolves on the dataset track from mu = l2") {
  ExperimentConfig cfg = parse_config_text(
      "[population]\nkind = \"dataset\"\nclasses = 3\ndim = 5\nsamples = 150\n"
      "separation = 2.0\nl2 = 0.01\nclients = 6\nk_bar = 3\nseed = 4\n"
      "[run]\nmode = \"GD\"\ncycles = 40\nclients_per_round = 2\neta = \"theorem\"\n");
  const Experiment ex = build_experiment(cfg);
  CHECK(ex.eta_from_theorem);
  CHECK(ex.step.eta_theorem > 0.0);
  CHECK(ex.run_config.eta == doctest::Approx(2.0 * ex.step.eta_theorem));
  // prescription: log(M T^2 / K_bar^2) / (mu N T) with mu = l2
  const double expect = std::log(6.0 * 120 * 120 / 9.0) / (0.01 * 2 * 120);
  CHECK(ex.step.eta_theorem == doctest::Approx(expect).epsilon(1e-12));
}
