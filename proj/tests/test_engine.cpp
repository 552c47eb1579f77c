#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "cycfed/engine.hpp"
#include "cycfed/quadratic.hpp"
#include "doctest.h"

using namespace cycfed;

namespace {

RunConfig base_config(Mode mode, double eta, int cycles, int n, std::uint64_t seed = 1) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.eta = eta;
  cfg.cycles = cycles;
  cfg.clients_per_round = n;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("local GD step: eta = 0 is a no-op; identity Hessian arithmetic") {
  const QuadraticPopulation pop = make_population(2, 2, 1, 1, 0, 0, 0, {1.0, 1.0}, 3);
  // Shift to the hand-checkable objective grad = w by moving to b = 0:
  // use the population only for its interface; build w relative to w*.
  const Eigen::VectorXd w = pop.constants().w_star + Eigen::Vector2d(2.0, 0.0);
  CHECK(local_update_gd(pop, 0, w, 0.0) == w);
  // grad F_0(w) = H (w - w*) = w - w* here (identity spectrum), so a step of
  // 0.5 halves the offset.
  const Eigen::VectorXd stepped = local_update_gd(pop, 0, w, 0.5);
  CHECK((stepped - (pop.constants().w_star + Eigen::Vector2d(1.0, 0.0))).norm() <= 1e-14);
}

TEST_CASE("one full-participation round equals an exact global GD step") {
  const QuadraticPopulation pop =
      make_population(4, 6, 1, 1, 0.0, 0.0, 0.0, {1.0, 1.3, 1.7, 2.0}, 5);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::GD, 0.2, 1, 6);
  Eigen::VectorXd w0(4);
  w0 << 1.0, -2.0, 0.5, 3.0;
  cfg.init = w0;
  cfg.record_iterates = true;
  const RunLog log = run(pop, sched, cfg);
  const Eigen::VectorXd expected = w0 - 0.2 * pop.global_gradient(w0);
  CHECK((log.final_model - expected).norm() <= 1e-12 * (1 + expected.norm()));
}

TEST_CASE("local SGD with tau=1 and a full batch reproduces local GD bitwise") {
  const QuadraticPopulation pop =
      make_population(4, 6, 2, 3, 0.4, 0.2, 0.3, {1, 1.2, 1.5, 2.0}, 7);
  RngStream rng(11);
  Eigen::VectorXd w(4);
  w << 0.3, -1.1, 2.0, 0.7;
  for (int m = 0; m < 6; ++m) {
    const Eigen::VectorXd gd = local_update_gd(pop, m, w, 0.17);
    const Eigen::VectorXd sgd = local_update_sgd(pop, m, w, 0.17, 1, 3, rng.child(m));
    CHECK(gd == sgd);  // exact equality
  }
}

TEST_CASE("two deterministic SGD steps match the closed-form expansion") {
  // B = 1 makes the stochastic oracle deterministic; two steps compose to
  // w - eta (2I - eta H)(H w - b).
  const QuadraticPopulation pop = make_population(2, 2, 1, 1, 0, 0, 0, {1.0, 2.5}, 13);
  const Eigen::MatrixXd h = pop.client_hessian(0);
  const Eigen::VectorXd b = pop.client(0).mean_linear();
  Eigen::VectorXd w(2);
  w << 1.5, -0.75;
  const double eta = 0.21;
  const Eigen::VectorXd expected =
      w - eta * (2.0 * Eigen::MatrixXd::Identity(2, 2) - eta * h) * (h * w - b);
  const Eigen::VectorXd got = local_update_sgd(pop, 0, w, eta, 2, 1, RngStream(1));
  CHECK((got - expected).norm() <= 1e-14 * (1 + expected.norm()));
}

TEST_CASE("sigma2 = 0 populations give seed-independent SGD trajectories") {
  // Zero heterogeneity + B=1: every client is identical and the stochastic
  // draw is deterministic, so the trajectory cannot depend on the seed.
  const QuadraticPopulation zero = make_population(4, 4, 2, 1, 0, 0, 0, {1, 1, 2, 2}, 17);
  const CycleSchedule sched(zero.groups(), TraversalOrder::Identity);
  RunConfig z1 = base_config(Mode::SGD, 0.1, 10, 2, 4242);
  z1.local_steps = 3;
  RunConfig z2 = base_config(Mode::SGD, 0.1, 10, 2, 31337);
  z2.local_steps = 3;
  CHECK(run(zero, sched, z1).final_model == run(zero, sched, z2).final_model);
}

TEST_CASE("SSGD: B=1 equals GD; opposite orders differ by eta^2 H (b1 - b0)") {
  const QuadraticPopulation pop = make_population(4, 4, 2, 1, 0.3, 0.2, 0, {1, 1, 2, 2}, 19);
  Eigen::VectorXd w(4);
  w << 0.1, 0.2, -0.3, 0.4;
  for (int m = 0; m < 4; ++m)
    CHECK(local_update_ssgd(pop, m, w, 0.12, {0}) == local_update_gd(pop, m, w, 0.12));

  const QuadraticPopulation two = make_population(4, 2, 1, 2, 0, 0, 0.3, {1, 1.4, 1.8, 2.2}, 23);
  const double eta = 0.15;
  const Eigen::VectorXd out01 = local_update_ssgd(two, 0, w, eta, {0, 1});
  const Eigen::VectorXd out10 = local_update_ssgd(two, 0, w, eta, {1, 0});
  const Eigen::MatrixXd h = two.client_hessian(0);
  const Eigen::VectorXd b0 = two.client(0).components[0].linear;
  const Eigen::VectorXd b1 = two.client(0).components[1].linear;
  const Eigen::VectorXd expected_diff = eta * eta * h * (b1 - b0);
  CHECK((out01 - out10 - expected_diff).norm() <= 1e-13);
  CHECK(expected_diff.norm() > 0.0);  // the orders genuinely differ

  // nu_bar = 0: identical components, any order gives the same output.
  const QuadraticPopulation same = make_population(4, 2, 1, 3, 0, 0, 0, {1, 1, 1, 1}, 29);
  CHECK(local_update_ssgd(same, 0, w, eta, {0, 1, 2}) ==
        local_update_ssgd(same, 0, w, eta, {2, 1, 0}));
}

TEST_CASE("full participation contracts the gap by the exact spectral factor") {
  const QuadraticPopulation pop =
      make_population(4, 6, 1, 1, 0, 0, 0, {1.0, 1.3, 1.7, 2.0}, 5);
  const double eta = 0.3;
  const Eigen::MatrixXd h = pop.client_hessian(0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  // Slowest mode: largest |1 - eta*lambda|; start exactly along it.
  int slow = 0;
  double best = -1.0;
  for (int j = 0; j < 4; ++j) {
    const double f = std::abs(1.0 - eta * es.eigenvalues()[j]);
    if (f > best) {
      best = f;
      slow = j;
    }
  }
  const double rho = best * best;

  RunConfig cfg = base_config(Mode::GD, eta, 12, 6);
  cfg.init = pop.constants().w_star + es.eigenvectors().col(slow);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  const RunLog log = run(pop, sched, cfg);
  std::vector<double> gaps{pop.global_loss(cfg.init) - pop.constants().f_star};
  for (const auto& rec : log.records) gaps.push_back(rec.loss_gap);
  for (int t = 5; t <= 10; ++t)
    CHECK(std::abs(gaps[t + 1] / gaps[t] - rho) <= 1e-10 * rho);
}

TEST_CASE("run: K = 0 gives an empty log and returns the initial model") {
  const QuadraticPopulation pop = make_population(2, 4, 2, 1, 0, 0, 0, {1, 2}, 31);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::GD, 0.1, 0, 2);
  Eigen::VectorXd w0(2);
  w0 << 5.0, -3.0;
  cfg.init = w0;
  const RunLog log = run(pop, sched, cfg);
  CHECK(log.records.empty());
  CHECK(log.final_model == w0);
}

TEST_CASE("run is deterministic per (config, seed)") {
  const QuadraticPopulation pop =
      make_population(4, 12, 3, 2, 0.5, 0.2, 0.3, {1, 1.3, 1.6, 2.0}, 37);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::SSGD, 0.05, 6, 2, 12345);
  const RunLog a = run(pop, sched, cfg);
  const RunLog b = run(pop, sched, cfg);
  REQUIRE(a.records.size() == b.records.size());
  CHECK(a.final_model == b.final_model);
  for (size_t t = 0; t < a.records.size(); ++t) {
    CHECK(a.records[t].clients == b.records[t].clients);
    CHECK(a.records[t].loss_gap == b.records[t].loss_gap);
  }
}

TEST_CASE("loss is monotone for GD on zero-heterogeneity populations") {
  const QuadraticPopulation pop = make_population(3, 6, 2, 1, 0, 0, 0, {0.8, 1.4, 2.0}, 41);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::GD, 0.5 / pop.constants().L, 10, 3);
  Eigen::VectorXd w0 = pop.constants().w_star;
  w0[0] += 4.0;
  w0[1] -= 2.0;
  cfg.init = w0;
  const RunLog log = run(pop, sched, cfg);
  double prev = pop.global_loss(w0) - pop.constants().f_star;
  for (const auto& rec : log.records) {
    CHECK(rec.loss_gap <= prev + 1e-15);
    prev = rec.loss_gap;
  }
}

TEST_CASE("gradient evaluation accounting is exact per mode") {
  const QuadraticPopulation pop =
      make_population(4, 6, 2, 5, 0.2, 0.1, 0.3, {1, 1.2, 1.4, 1.6}, 43);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  const int cycles = 2, n = 3;  // T = 4 rounds

  RunConfig gd = base_config(Mode::GD, 0.05, cycles, n);
  CHECK(run(pop, sched, gd).records.back().evals == 4 * n);

  RunConfig sgd = base_config(Mode::SGD, 0.05, cycles, n);
  sgd.local_steps = 4;
  sgd.minibatch = 2;
  CHECK(run(pop, sched, sgd).records.back().evals == 4 * n * 4);

  RunConfig ssgd = base_config(Mode::SSGD, 0.05, cycles, n);
  CHECK(run(pop, sched, ssgd).records.back().evals == 4 * n * 5);
}

TEST_CASE("divergence guard aborts instead of logging non-finite values") {
  const QuadraticPopulation pop = make_population(2, 4, 2, 1, 0, 0, 0, {1, 2}, 47);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::GD, 50.0, 500, 2);
  Eigen::VectorXd w0 = pop.constants().w_star;
  w0[0] += 1.0;
  cfg.init = w0;
  CHECK_THROWS_AS(run(pop, sched, cfg), DivergenceError);
}

TEST_CASE("theoretical step size: GD formula value, warning flag, SGD tau=1 reduction") {
  PopulationConstants k;
  k.mu = 1.0;
  k.L = 1.0;
  const StepSize gd = theoretical_step_size(Mode::GD, k, 12, 3, 4, 1, 1, 300);
  // eta = ln(12*300^2/9) / (1*4*300) = ln(120000)/1200
  CHECK(gd.eta_theorem == doctest::Approx(std::log(120000.0) / 1200.0).epsilon(1e-12));
  CHECK(gd.eta_local == doctest::Approx(4.0 * gd.eta_theorem).epsilon(1e-12));
  CHECK_FALSE(gd.warning);  // 300 >= 7*1*3*ln(120000) ~ 245.6

  PopulationConstants k2 = k;
  k2.L = 2.0;  // kappa doubled pushes the bound to ~491 > 300
  CHECK(theoretical_step_size(Mode::GD, k2, 12, 3, 4, 1, 1, 300).warning);

  const StepSize sgd = theoretical_step_size(Mode::SGD, k, 12, 3, 4, 1, 1, 300);
  CHECK(sgd.eta_theorem == doctest::Approx(gd.eta_theorem).epsilon(1e-12));

  const StepSize ssgd = theoretical_step_size(Mode::SSGD, k, 12, 3, 4, 1, 4, 300);
  CHECK(ssgd.eta_theorem ==
        doctest::Approx(std::log(12.0 * 4 * 300 * 300 / 9.0) / (4.0 * 300)).epsilon(1e-12));
  CHECK(ssgd.eta_local == ssgd.eta_theorem);  // no N conversion for SSGD
}

TEST_CASE("runlog CSV: schema, one row per round, round-trip precision") {
  const QuadraticPopulation pop = make_population(2, 4, 2, 1, 0, 0, 0, {1, 2}, 53);
  const CycleSchedule sched(pop.groups(), TraversalOrder::Identity);
  RunConfig cfg = base_config(Mode::GD, 0.1, 3, 2);
  Eigen::VectorXd w0 = pop.constants().w_star;
  w0[0] += 1.0;
  cfg.init = w0;
  const RunLog log = run(pop, sched, cfg);
  std::ostringstream os;
  write_runlog_csv(log, os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,k,i,clients,loss_gap,grad_norm,evals");
  int rows = 0;
  while (std::getline(is, line)) {
    ++rows;
    // no ragged rows: exactly 6 commas
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.find(';') != std::string::npos);  // two clients joined by ';'
  }
  CHECK(rows == 6);

  // Full round-trip float precision.
  const double v = log.records.back().loss_gap;
  CHECK(std::stod(format_double(v)) == v);
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
