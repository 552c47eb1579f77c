#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "cycfed/quadratic.hpp"

namespace cycfed {

// One cycle-epoch of local GD on a quadratic population decomposes exactly as
//   w^(k+1,0) - w^(k,0) = -eta * sum_i qbar_i + eta^2 * rbar,
// with qbar_i the summed client gradients at the cycle start, Sbar_i the
// summed client Hessians, and
//   rbar = sum_{i=1}^{Kbar-1} (prod_{j=i+2}^{Kbar} (I - eta Sbar_j))
//          Sbar_{i+1} sum_{j'<=i} qbar_{j'}.
// eta here is the sum-aggregation step (local step / N).
struct CycleDecomposition {
  Eigen::VectorXd linear_term;         // -eta * sum_i qbar_i
  Eigen::VectorXd noise_term;          // eta^2 * rbar
  Eigen::VectorXd reconstructed_delta; // linear_term + noise_term
  double residual_norm = 0.0;          // vs. the engine's actual cycle update
};

CycleDecomposition decompose_cycle(const QuadraticPopulation& pop, const Eigen::VectorXd& w0,
                                   const std::vector<std::vector<int>>& selected,
                                   double eta_sum);

// Exact check of the without-replacement variance identity
//   E || mean of N-sample - xbar ||^2
//     = (K-N) / (N K (K-1)) * sum_k ||x_k - xbar||^2.
// lhs is computed by enumerating all C(K,N) subsets (rejected above 1e6).
std::pair<double, double> wor_variance_check(const std::vector<Eigen::VectorXd>& xs, int N);

// Empirical heterogeneity suprema over a probe set; lower bounds on the
// true constants (exact for shared-Hessian quadratics where the gradient
// deviations are constant in w).
struct HeterogeneityEstimate {
  double gamma_hat = 0.0;
  double alpha_hat = 0.0;
  double nu_hat = 0.0;
  double nu_bar_hat = 0.0;
};

HeterogeneityEstimate estimate_heterogeneity(const Population& pop,
                                             const std::vector<Eigen::VectorXd>& probes);

// Finite-population subsampling factor (G - N)/(G - 1) for group size G,
// defined as 0 at full participation (also in the 0/0 case G = N = 1).
double finite_population_factor(double group_size, double n);

// Dominant-term total costs to reach an eps error, up to a shared constant.
//   C_GD   = c * Kbar * gamma^2 / (eps N) * fp
//   C_SGD  = C_GD + c * sigma2 * Kbar / (eps N tau)
double cost_gd(double eps, double c_unit, double M, double K_bar, double N, double gamma);
double cost_sgd(double eps, double c_unit, double M, double K_bar, double N, double gamma,
                double sigma2, int tau);

struct CostVerdict {
  std::string comparison;
  bool holds = false;
  std::string citation;
};

struct CostReport {
  double c_unit = 1.0;
  double epsilon = 0.0;
  std::vector<std::pair<std::string, double>> costs;
  std::vector<CostVerdict> verdicts;
};

// Refined-cost comparison at full within-group participation (K_bar = M/N,
// enforced): evaluates, at equal constants c_unit * kappa / sqrt(mu * eps),
//   GD@Kbar    = Kbar / sqrt(M) + Kbar alpha
//   SSGD@Kbar  = Kbar / sqrt(MB) + nu + Kbar alpha + nu_bar / sqrt(B)
//   LocalRR    = Kbar (1 / sqrt(MB) + nu + nu_bar / sqrt(B))
// plus the SSGD-vs-GD predicate 1 - 1/sqrt(B) - nu - nu_bar/sqrt(B) > 0
// (degenerate at B = 1, where SSGD is GD) and the SSGD-vs-local-RR
// threshold M > N (1 + alpha / (gamma + nu_bar / sqrt(B))).
CostReport cost_ssgd_vs_alternatives(double eps, double c_unit, double M, double K_bar, double N,
                                     int B, double gamma, double alpha, double nu, double nu_bar,
                                     double mu, double kappa);

// Least-squares slope of log(error) vs log(T). The first quarter of the T
// values is dropped as burn-in (the exponential term of the rate bounds
// dominates there), never below 4 kept points. Non-positive errors are
// excluded and flagged.
struct RateFit {
  std::vector<std::pair<double, double>> window;  // (T, error) actually fitted
  double slope = 0.0;
  double r2 = 0.0;
  int discarded_burn_in = 0;
  bool excluded_nonpositive = false;
};

RateFit fit_rate(std::vector<std::pair<double, double>> runs);

void write_cost_report(const CostReport& report, std::ostream& os);
void write_cost_report_csv_row(const CostReport& report, std::ostream& os);
void write_rate_fit(const RateFit& fit, std::ostream& os);
void write_rate_fit_csv_row(const RateFit& fit, std::ostream& os);

}  // namespace cycfed
