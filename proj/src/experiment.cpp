#include "cycfed/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

namespace cycfed {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<const Population> build_population(const ExperimentConfig& cfg, int k_bar) {
  if (cfg.kind == "quadratic") {
    std::vector<double> spectrum = cfg.spectrum;
    if (spectrum.empty()) spectrum.assign(cfg.dim, 1.0);
    return std::make_shared<QuadraticPopulation>(
        make_population(cfg.dim, cfg.clients, k_bar, cfg.components, cfg.gamma, cfg.alpha,
                        cfg.nu_bar, spectrum, cfg.population_seed, cfg.hessian_jitter));
  }
  LabeledDataset ds = make_gaussian_mixture(cfg.classes, cfg.dim, cfg.samples, cfg.separation,
                                            cfg.population_seed);
  std::vector<ClientShard> shards =
      dirichlet_partition(ds, cfg.clients, cfg.concentration, cfg.components,
                          cfg.population_seed);
  const GroupingMode mode =
      cfg.grouping == "random" ? GroupingMode::Random : GroupingMode::LabelSorted;
  std::vector<std::vector<int>> groups =
      group_by_label_affinity(ds, shards, k_bar, mode, cfg.population_seed);
  return std::make_shared<ClassificationPopulation>(std::move(ds), std::move(shards),
                                                    std::move(groups), cfg.l2);
}

PopulationConstants constants_for_step_size(const ExperimentConfig& cfg,
                                            const Population& pop) {
  if (const auto* quad = dynamic_cast<const QuadraticPopulation*>(&pop))
    return quad->constants();
  // Logistic track: mu = l2 exactly; L bounded by l2 + max row curvature.
  const auto& cls = dynamic_cast<const ClassificationPopulation&>(pop);
  PopulationConstants k;
  k.mu = cfg.l2;
  double max_sq = 0.0;
  const auto& x = cls.dataset().features;
  for (int r = 0; r < x.rows(); ++r) max_sq = std::max(max_sq, x.row(r).squaredNorm());
  k.L = cfg.l2 + 0.5 * max_sq;
  k.estimated = true;
  return k;
}

}  // namespace

Experiment build_experiment(const ExperimentConfig& cfg, const Overrides& ov) {
  Experiment ex;
  ex.k_bar = ov.k_bar > 0 ? ov.k_bar : cfg.k_bar;
  if (cfg.clients % ex.k_bar != 0)
    throw ConfigError(0, "k_bar " + std::to_string(ex.k_bar) + " does not divide clients");
  ex.total_rounds = ov.total_rounds > 0 ? ov.total_rounds : cfg.cycles * ex.k_bar;
  if (ex.total_rounds % ex.k_bar != 0)
    throw ConfigError(0, "total rounds " + std::to_string(ex.total_rounds) +
                             " not divisible by k_bar " + std::to_string(ex.k_bar));

  ex.population = build_population(cfg, ex.k_bar);
  const TraversalOrder order =
      cfg.order == "shuffled" ? TraversalOrder::Shuffled : TraversalOrder::Identity;
  ex.schedule = std::make_shared<CycleSchedule>(ex.population->groups(), order, cfg.order_seed);

  RunConfig rc;
  rc.mode = mode_from_name(cfg.mode);
  rc.cycles = ex.total_rounds / ex.k_bar;
  rc.clients_per_round = cfg.clients_per_round;
  rc.local_steps = cfg.tau;
  rc.minibatch = cfg.minibatch;
  rc.seed = ov.seed >= 0 ? static_cast<std::uint64_t>(ov.seed) : cfg.run_seed;
  rc.record_iterates = cfg.record_iterates;
  if (cfg.clients_per_round > cfg.clients / ex.k_bar)
    throw ConfigError(0, "clients_per_round exceeds group size at k_bar " +
                             std::to_string(ex.k_bar));

  if (cfg.eta_theorem) {
    const PopulationConstants k = constants_for_step_size(cfg, *ex.population);
    ex.step = theoretical_step_size(rc.mode, k, cfg.clients, ex.k_bar, cfg.clients_per_round,
                                    cfg.tau, cfg.components, ex.total_rounds);
    rc.eta = ex.step.eta_local;
    ex.eta_from_theorem = true;
  } else {
    rc.eta = cfg.eta;
  }

  if (cfg.init_scale != 0.0) {
    RngStream dir = RngStream(rc.seed).child(stream_tag::kInit);
    Eigen::VectorXd v(ex.population->dim());
    for (int j = 0; j < v.size(); ++j) v[j] = dir.gaussian();
    rc.init = cfg.init_scale * v / v.norm();
  }
  ex.run_config = rc;
  return ex;
}

namespace {

struct CellOutcome {
  std::string label;
  int k_bar = 0;
  int rounds = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  double final_loss_gap = 0.0;
};

void write_summary(const Experiment& ex, const RunLog& log, std::ostream& os) {
  os << "mode = " << mode_name(ex.run_config.mode) << "\n";
  os << "k_bar = " << ex.k_bar << "\n";
  os << "rounds = " << ex.total_rounds << "\n";
  os << "clients_per_round = " << ex.run_config.clients_per_round << "\n";
  os << "eta_local = " << format_double(log.eta_local) << "\n";
  if (ex.eta_from_theorem) {
    os << "eta_theorem = " << format_double(ex.step.eta_theorem) << "\n";
    os << "theorem_round_lower_bound = " << format_double(ex.step.t_lower_bound) << "\n";
    os << "step_size_warning = " << (ex.step.warning ? "true" : "false") << "\n";
    if (ex.step.warning)
      os << "warning = rounds below the theorem lower bound; rate guarantees do not apply\n";
  }
  os << "traversal_order =";
  for (int g : log.traversal_order) os << ' ' << g;
  os << "\n";
  if (!log.records.empty()) {
    const auto& last = log.records.back();
    os << (log.f_star_known ? "final_loss_gap = " : "final_loss = ")
       << format_double(last.loss_gap) << "\n";
    os << "final_grad_norm = " << format_double(last.grad_norm) << "\n";
    os << "total_gradient_evaluations = " << last.evals << "\n";
  }
}

CellOutcome run_cell(const ExperimentConfig& cfg, int k_bar, int rounds, std::uint64_t seed,
                     const fs::path& dir) {
  CellOutcome out;
  out.k_bar = k_bar;
  out.rounds = rounds;
  out.seed = seed;
  std::ostringstream label;
  label << "kbar" << k_bar << "_T" << rounds << "_seed" << seed;
  out.label = label.str();
  try {
    Overrides ov;
    ov.k_bar = k_bar;
    ov.total_rounds = rounds;
    ov.seed = static_cast<long long>(seed);
    Experiment ex = build_experiment(cfg, ov);
    RunLog log = run(*ex.population, *ex.schedule, ex.run_config);
    if (ex.eta_from_theorem) {
      log.eta_theorem = ex.step.eta_theorem;
      log.step_size_warning = ex.step.warning;
    }
    fs::create_directories(dir);
    std::ofstream csv(dir / "runlog.csv");
    write_runlog_csv(log, csv);
    std::ofstream summary(dir / "summary.txt");
    write_summary(ex, log, summary);
    out.ok = true;
    out.final_loss_gap = log.records.empty() ? 0.0 : log.records.back().loss_gap;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

int execute_run(const ExperimentConfig& cfg, const std::string& out_dir) {
  Experiment ex = build_experiment(cfg);
  fs::create_directories(out_dir);
  try {
    RunLog log = run(*ex.population, *ex.schedule, ex.run_config);
    if (ex.eta_from_theorem) {
      log.eta_theorem = ex.step.eta_theorem;
      log.step_size_warning = ex.step.warning;
    }
    std::ofstream csv(fs::path(out_dir) / "runlog.csv");
    write_runlog_csv(log, csv);
    std::ofstream summary(fs::path(out_dir) / "summary.txt");
    write_summary(ex, log, summary);
    if (cfg.export_shards && cfg.kind == "dataset") {
      const auto* cls = dynamic_cast<const ClassificationPopulation*>(ex.population.get());
      if (cls) {
        std::vector<ClientShard> shards;
        for (int m = 0; m < cls->num_clients(); ++m) shards.push_back(cls->shard(m));
        std::ofstream shard_csv(fs::path(out_dir) / "shards.csv");
        write_shards_csv(shards, shard_csv);
      }
    }
    return 0;
  } catch (const DivergenceError& e) {
    std::ofstream summary(fs::path(out_dir) / "summary.txt");
    summary << "diverged = true\n";
    summary << "error = " << e.what() << "\n";
    return 2;
  }
}

int execute_sweep(const ExperimentConfig& cfg, const std::string& out_dir, int jobs) {
  std::vector<int> k_bars = cfg.sweep_k_bar;
  if (k_bars.empty()) k_bars.push_back(cfg.k_bar);
  std::vector<int> rounds = cfg.sweep_rounds;
  if (rounds.empty()) rounds.push_back(cfg.cycles * cfg.k_bar);
  std::vector<std::uint64_t> seeds = cfg.sweep_seeds;
  if (seeds.empty()) seeds.push_back(cfg.run_seed);

  struct CellSpec {
    int k_bar, rounds;
    std::uint64_t seed;
  };
  std::vector<CellSpec> cells;
  for (int kb : k_bars)
    for (int t : rounds)
      for (std::uint64_t s : seeds) cells.push_back({kb, t, s});

  fs::create_directories(fs::path(out_dir) / "cells");
  std::vector<CellOutcome> outcomes(cells.size());

  // Cells are independent: disjoint RNG roots, disjoint output files.
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= cells.size()) break;
      const CellSpec& c = cells[idx];
      std::ostringstream name;
      name << "kbar" << c.k_bar << "_T" << c.rounds << "_seed" << c.seed;
      outcomes[idx] =
          run_cell(cfg, c.k_bar, c.rounds, c.seed, fs::path(out_dir) / "cells" / name.str());
    }
  };
  const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(cells.size())));
  std::vector<std::thread> pool;
  for (int i = 1; i < workers; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  // Aggregate over exactly the seed axis.
  std::ofstream agg(fs::path(out_dir) / "sweep.csv");
  agg << "k_bar,rounds,seeds_ok,seeds_failed,mean_final_loss_gap,min_final_loss_gap,"
         "max_final_loss_gap\n";
  for (int kb : k_bars) {
    for (int t : rounds) {
      double sum = 0.0, mn = 0.0, mx = 0.0;
      int ok = 0, failed = 0;
      for (const auto& o : outcomes) {
        if (o.k_bar != kb || o.rounds != t) continue;
        if (!o.ok) {
          ++failed;
          continue;
        }
        if (ok == 0) {
          mn = mx = o.final_loss_gap;
        } else {
          mn = std::min(mn, o.final_loss_gap);
          mx = std::max(mx, o.final_loss_gap);
        }
        sum += o.final_loss_gap;
        ++ok;
      }
      agg << kb << ',' << t << ',' << ok << ',' << failed;
      if (ok > 0)
        agg << ',' << format_double(sum / ok) << ',' << format_double(mn) << ','
            << format_double(mx) << '\n';
      else
        agg << ",,,\n";
    }
  }

  std::ofstream status(fs::path(out_dir) / "cells.txt");
  int ok_count = 0;
  for (const auto& o : outcomes) {
    status << o.label << ": " << (o.ok ? "ok" : "failed: " + o.error) << '\n';
    if (o.ok) ++ok_count;
  }
  return ok_count > 0 ? 0 : 1;
}

}  // namespace cycfed
