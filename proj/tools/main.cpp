#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cycfed/analysis.hpp"
#include "cycfed/config.hpp"
#include "cycfed/experiment.hpp"
#include "cycfed/verify.hpp"

namespace {

std::string resolve_out_dir(const std::string& flag_out, const cycfed::ExperimentConfig& cfg) {
  if (!flag_out.empty()) return flag_out;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("CYCFED_OUT"); env && *env) return env;
  return "out";
}

int print_checks(const std::vector<cycfed::CheckResult>& checks) {
  bool all_pass = true;
  for (const auto& c : checks) {
    char timing[32];
    std::snprintf(timing, sizeof(timing), "%.2f", c.seconds);
    std::cout << (c.pass ? "PASS" : "FAIL") << "  " << c.id << "  [" << timing << " s]\n      "
              << c.detail << "\n";
    all_pass = all_pass && c.pass;
  }
  std::cout << (all_pass ? "all checks passed" : "some checks FAILED") << std::endl;
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cycfed: cyclic-client-participation federated averaging simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_flag;
  long long seed_flag = -1;
  int jobs = 1;

  auto* cmd_run = app.add_subcommand("run", "execute one training run from a config");
  cmd_run->add_option("--config", config_path, "config file path")->required();
  cmd_run->add_option("--out", out_flag, "output directory");
  cmd_run->add_option("--seed", seed_flag, "override the run seed");

  auto* cmd_sweep = app.add_subcommand("sweep", "execute the config's sweep grid");
  cmd_sweep->add_option("--config", config_path, "config file path")->required();
  cmd_sweep->add_option("--out", out_flag, "output directory");
  cmd_sweep->add_option("--jobs", jobs, "max concurrent cells")->check(CLI::PositiveNumber);
  cmd_sweep->add_option("--seed", seed_flag, "override the base run seed");

  std::string suite = "all";
  auto* cmd_verify = app.add_subcommand("verify", "run a named acceptance suite");
  cmd_verify->add_option("suite", suite,
                         "decomposition | wor | reductions | costs | rates | all");

  auto* cmd_cost = app.add_subcommand("cost", "evaluate the cost models and comparison verdicts");
  double m = 12, n = 2, k_bar = 6, gamma = 1.0, alpha = 0.0, nu = -1.0, nu_bar = 0.0,
         sigma2 = 0.0, eps = 0.1, c_unit = 1.0, mu = 1.0, kappa = 1.0;
  int b = 1, tau = 1;
  bool gd_cost_grid = false;
  cmd_cost->add_option("--M", m, "total clients");
  cmd_cost->add_option("--N", n, "clients per round");
  cmd_cost->add_option("--K-bar", k_bar, "groups per cycle");
  cmd_cost->add_option("--B", b, "components per client");
  cmd_cost->add_option("--gamma", gamma, "intra-group heterogeneity");
  cmd_cost->add_option("--alpha", alpha, "inter-group heterogeneity");
  cmd_cost->add_option("--nu", nu, "client-to-global heterogeneity (default gamma+alpha)");
  cmd_cost->add_option("--nu-bar", nu_bar, "intra-client component heterogeneity");
  cmd_cost->add_option("--sigma2", sigma2, "stochastic gradient variance");
  cmd_cost->add_option("--tau", tau, "local steps");
  cmd_cost->add_option("--eps", eps, "target error");
  cmd_cost->add_option("--c", c_unit, "per-round cost unit");
  cmd_cost->add_option("--mu", mu, "PL constant");
  cmd_cost->add_option("--kappa", kappa, "condition number");
  cmd_cost->add_flag("--gd-cost-grid", gd_cost_grid,
                     "exhaustive M <= 60 check that grouped GD never costs less than "
                     "ungrouped below full participation");

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_run->parsed()) {
      cycfed::ExperimentConfig cfg = cycfed::load_config_file(config_path);
      if (seed_flag >= 0) cfg.run_seed = static_cast<std::uint64_t>(seed_flag);
      return cycfed::execute_run(cfg, resolve_out_dir(out_flag, cfg));
    }
    if (cmd_sweep->parsed()) {
      cycfed::ExperimentConfig cfg = cycfed::load_config_file(config_path);
      if (seed_flag >= 0) cfg.run_seed = static_cast<std::uint64_t>(seed_flag);
      return cycfed::execute_sweep(cfg, resolve_out_dir(out_flag, cfg), jobs);
    }
    if (cmd_verify->parsed()) {
      return print_checks(cycfed::verify_suite(suite));
    }
    if (cmd_cost->parsed()) {
      if (k_bar < 1 || n < 1 || m < 1 || std::fmod(m, k_bar) != 0.0) {
        std::cerr << "inconsistent flags: K_bar must divide M" << std::endl;
        return 1;
      }
      if (n > m / k_bar) {
        std::cerr << "inconsistent flags: N exceeds the group size M/K_bar" << std::endl;
        return 1;
      }
      if (gd_cost_grid) {
        bool holds = true;
        for (int mm = 4; mm <= 60 && holds; ++mm)
          for (int nn = 2; nn <= mm && holds; ++nn) {
            if (mm % nn != 0) continue;
            for (int kb = 2; kb * nn < mm && holds; ++kb) {
              if (mm % kb != 0) continue;
              holds = cycfed::cost_gd(eps, c_unit, mm, kb, nn, 1.0) >
                      cycfed::cost_gd(eps, c_unit, mm, 1, nn, 1.0);
            }
          }
        std::cout << "grouped-GD cost grid (M <= 60, N | M): holds: "
                  << (holds ? "true" : "false") << std::endl;
        return holds ? 0 : 3;
      }
      cycfed::CostReport report;
      report.c_unit = c_unit;
      report.epsilon = eps;
      if (nu < 0) nu = gamma + alpha;
      report.costs.emplace_back("GD@Kbar(dominant)",
                                cycfed::cost_gd(eps, c_unit, m, k_bar, n, gamma));
      report.costs.emplace_back("GD@1(dominant)", cycfed::cost_gd(eps, c_unit, m, 1, n, gamma));
      report.costs.emplace_back("SGD@Kbar(dominant)",
                                cycfed::cost_sgd(eps, c_unit, m, k_bar, n, gamma, sigma2, tau));
      report.costs.emplace_back("SGD@1(dominant)",
                                cycfed::cost_sgd(eps, c_unit, m, 1, n, gamma, sigma2, tau));
      if (std::abs(k_bar * n - m) < 1e-9) {
        const cycfed::CostReport refined = cycfed::cost_ssgd_vs_alternatives(
            eps, c_unit, m, k_bar, n, b, gamma, alpha, nu, nu_bar, mu, kappa);
        for (const auto& kv : refined.costs) report.costs.push_back(kv);
        report.verdicts = refined.verdicts;
      } else {
        report.verdicts.push_back({"refined_costs_skipped", true,
                                   "K_bar != M/N: the refined comparisons require full "
                                   "within-group participation"});
      }
      cycfed::write_cost_report(report, std::cout);
      return 0;
    }
  } catch (const cycfed::ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 1;
  } catch (const cycfed::DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
