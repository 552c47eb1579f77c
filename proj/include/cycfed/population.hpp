#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

namespace cycfed {

// Heterogeneity and regularity constants of a client population.
// For shared-Hessian quadratic populations every entry is exact; otherwise
// gamma/alpha/nu_bar/sigma2 are suprema over a probe set and `estimated`
// is set.
struct PopulationConstants {
  double L = 0.0;        // smoothness, max Hessian eigenvalue over components
  double mu = 0.0;       // PL constant, min eigenvalue of the averaged Hessian
  double gamma = 0.0;    // intra-group gradient deviation bound
  double alpha = 0.0;    // inter-group gradient deviation bound
  double nu = 0.0;       // client-to-global bound, nu = gamma + alpha
  double nu_bar = 0.0;   // intra-client component deviation bound
  double sigma2 = 0.0;   // single-draw stochastic gradient variance, max over clients
  double f_star = 0.0;   // minimum of the global objective
  Eigen::VectorXd w_star;
  bool estimated = false;

  double kappa() const { return L / mu; }
};

// What the training engine needs from a population of client objectives:
// per-client full gradients (GD), a sampled-index stochastic oracle (local
// SGD), and a fixed partition into components (shuffled SGD). Populations
// are immutable after construction and safe for concurrent reads.
class Population {
 public:
  virtual ~Population() = default;

  virtual int dim() const = 0;
  virtual int num_clients() const = 0;
  // Disjoint client groups sigma(1..K_bar), each of size M/K_bar.
  virtual const std::vector<std::vector<int>>& groups() const = 0;

  virtual double client_loss(int m, const Eigen::VectorXd& w) const = 0;
  virtual Eigen::VectorXd client_gradient(int m, const Eigen::VectorXd& w) const = 0;

  // Fixed component partition of client m's objective:
  // F_m = (1/B) sum_l F_{m,l}.
  virtual int num_components(int m) const = 0;
  virtual Eigen::VectorXd component_gradient(int m, int l, const Eigen::VectorXd& w) const = 0;

  // Uniform sampling pool for local SGD minibatches (components for
  // quadratics, shard rows for datasets). `idx` is ascending, so the
  // full pool reproduces client_gradient bitwise.
  virtual int sgd_pool_size(int m) const = 0;
  virtual Eigen::VectorXd sgd_gradient(int m, const Eigen::VectorXd& w,
                                       const std::vector<int>& idx) const = 0;

  virtual double global_loss(const Eigen::VectorXd& w) const = 0;
  virtual Eigen::VectorXd global_gradient(const Eigen::VectorXd& w) const = 0;

  // F* when known exactly (quadratics), otherwise empty.
  virtual std::optional<double> optimal_value() const { return std::nullopt; }
};

}  // namespace cycfed
