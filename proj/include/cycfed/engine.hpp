#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "cycfed/population.hpp"
#include "cycfed/rng.hpp"
#include "cycfed/schedule.hpp"

namespace cycfed {

enum class Mode { GD, SGD, SSGD };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& s);

// Thrown when an iterate norm exceeds the divergence guard; the run is
// aborted instead of logging non-finite values.
class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(int round)
      : std::runtime_error("iterate norm exceeded 1e12 at round " + std::to_string(round)),
        round(round) {}
  int round;
};

struct RunConfig {
  Mode mode = Mode::GD;
  double eta = 0.0;          // local step size (already converted, see StepSize)
  int cycles = 0;            // K; total rounds T = K * K_bar
  int clients_per_round = 1; // N
  int local_steps = 1;       // tau, SGD mode
  int minibatch = 1;         // b, SGD mode
  std::uint64_t seed = 0;
  bool record_iterates = false;
  Eigen::VectorXd init;      // empty -> zero vector
};

struct RoundRecord {
  int t = 0;  // 0-based global round
  int k = 0;  // 1-based cycle-epoch
  int i = 0;  // 1-based round-in-cycle
  std::vector<int> clients;
  double loss_gap = 0.0;   // F(w) - F* when F* is known, else F(w)
  double grad_norm = 0.0;  // ||grad F(w)||
  long long evals = 0;     // cumulative local gradient evaluations
};

struct RunLog {
  std::vector<RoundRecord> records;      // exactly T entries
  Eigen::VectorXd final_model;
  std::vector<Eigen::VectorXd> iterates; // w after each round, when recorded
  double eta_local = 0.0;
  double eta_theorem = 0.0;              // 0 when eta was given directly
  bool step_size_warning = false;
  bool f_star_known = false;
  std::vector<int> traversal_order;
};

// Single local GD step: w - eta * grad F_m(w).
Eigen::VectorXd local_update_gd(const Population& pop, int m, const Eigen::VectorXd& w,
                                double eta);

// tau sequential steps on fresh uniform without-replacement minibatches of
// size b from the client's sampling pool.
Eigen::VectorXd local_update_sgd(const Population& pop, int m, const Eigen::VectorXd& w,
                                 double eta, int tau, int b, RngStream rng);

// One pass over the B components in the order given by pi.
Eigen::VectorXd local_update_ssgd(const Population& pop, int m, const Eigen::VectorXd& w,
                                  double eta, const std::vector<int>& pi);

// Full cyclic-participation loop: K cycle-epochs of K_bar rounds each;
// every round samples N clients from the scheduled group, runs the local
// update, and averages the returned models. Deterministic per (config, seed).
RunLog run(const Population& pop, const CycleSchedule& sched, const RunConfig& cfg);

// One cycle-epoch of local GD under externally fixed selections (one client
// set per round), mean aggregation with local step eta_local. Used as the
// trajectory oracle for the cycle decomposition.
Eigen::VectorXd run_cycle_gd(const Population& pop, const Eigen::VectorXd& w0,
                             const std::vector<std::vector<int>>& selected, double eta_local);

// Step-size prescriptions of the convergence theorems, plus the conversion
// to this engine's mean-aggregation local step. The analyses are written for
// sum-aggregated updates with effective rate eta*K_bar*N (GD, SGD), so the
// local step is N times the theorem value for those modes; the SSGD
// prescription is already in local-step units.
struct StepSize {
  double eta_theorem = 0.0;
  double eta_local = 0.0;
  bool warning = false;       // T below the theorem's lower bound
  double t_lower_bound = 0.0;
};

StepSize theoretical_step_size(Mode mode, const PopulationConstants& constants, int M, int K_bar,
                               int N, int tau, int B, int T);

// CSV with header t,k,i,clients,loss_gap,grad_norm,evals; clients is a
// ';'-joined index list; floats carry full round-trip precision.
void write_runlog_csv(const RunLog& log, std::ostream& os);

std::string format_double(double v);  // shortest round-trip representation

}  // namespace cycfed
