#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "cycfed/population.hpp"
#include "cycfed/rng.hpp"

namespace cycfed {

// One quadratic loss component F_{m,l}(w) = 1/2 w'Hw - b'w + c with H
// symmetric positive definite.
struct QuadraticComponent {
  Eigen::MatrixXd hessian;
  Eigen::VectorXd linear;
  double offset = 0.0;

  double value(const Eigen::VectorXd& w) const {
    return 0.5 * w.dot(hessian * w) - linear.dot(w) + offset;
  }
  Eigen::VectorXd gradient(const Eigen::VectorXd& w) const { return hessian * w - linear; }
};

// Client objective F_m(w) = (1/B) sum_l F_{m,l}(w).
struct ClientQuadratic {
  std::vector<QuadraticComponent> components;
  int client_index = 0;

  // Mean of the component linear terms, i.e. the linear term of F_m.
  Eigen::VectorXd mean_linear() const;
  Eigen::MatrixXd mean_hessian() const;
};

// Synthetic population of M quadratic clients split into K_bar groups. The
// default construction shares one Hessian across every component so that all
// heterogeneity constants are exact: with a common H, gradient differences
// between clients are constant in w and the suprema in the heterogeneity
// bounds are attained everywhere.
class QuadraticPopulation final : public Population {
 public:
  QuadraticPopulation(std::vector<ClientQuadratic> clients,
                      std::vector<std::vector<int>> groups, bool shared_hessian);

  int dim() const override { return dim_; }
  int num_clients() const override { return static_cast<int>(clients_.size()); }
  const std::vector<std::vector<int>>& groups() const override { return groups_; }
  bool shared_hessian() const { return shared_hessian_; }
  const ClientQuadratic& client(int m) const { return clients_.at(m); }

  double client_loss(int m, const Eigen::VectorXd& w) const override;
  Eigen::VectorXd client_gradient(int m, const Eigen::VectorXd& w) const override;
  Eigen::MatrixXd client_hessian(int m) const;

  int num_components(int m) const override {
    return static_cast<int>(clients_.at(m).components.size());
  }
  Eigen::VectorXd component_gradient(int m, int l, const Eigen::VectorXd& w) const override;

  int sgd_pool_size(int m) const override { return num_components(m); }
  Eigen::VectorXd sgd_gradient(int m, const Eigen::VectorXd& w,
                               const std::vector<int>& idx) const override;

  // One component gradient at an index drawn uniformly from [0, B).
  // Unbiased for client_gradient; variance is sigma2 of the constants.
  Eigen::VectorXd stochastic_gradient(int m, const Eigen::VectorXd& w, RngStream& rng) const;

  double global_loss(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd global_gradient(const Eigen::VectorXd& w) const override;
  std::optional<double> optimal_value() const override { return constants_.f_star; }

  const PopulationConstants& constants() const { return constants_; }

 private:
  void compute_constants();

  std::vector<ClientQuadratic> clients_;
  std::vector<std::vector<int>> groups_;
  bool shared_hessian_;
  int dim_;
  // Averages for O(d^2) global queries.
  Eigen::MatrixXd avg_hessian_;
  Eigen::VectorXd avg_linear_;
  double avg_offset_ = 0.0;
  PopulationConstants constants_;
};

// Builds a population whose heterogeneity constants hit the targets exactly.
//
// All components share the Hessian H = Q diag(spectrum) Q' (Q a seeded random
// orthogonal matrix). Linear terms are b_{m,l} = b_bar + u_{g(m)} + v_m +
// z_{m,l} where the group offsets u_i, within-group client offsets v_m and
// per-client component offsets z_{m,l} are zero-sum equal-norm "polygon"
// patterns living in two orthonormal planes orthogonal to each other, so
// group means, client means and the global mean telescope exactly and the
// realized gamma / alpha / nu_bar equal the targets.
//
// Requires K_bar | M, positive spectrum, and d >= 4 whenever any target is
// positive (two offset planes). target_alpha > 0 needs K_bar >= 2,
// target_gamma > 0 needs group size >= 2, target_nu_bar > 0 needs B >= 2.
//
// hessian_jitter > 0 switches to the perturbed mode: client Hessians get
// per-client eigenvalue scalings and every heterogeneity constant is
// reported as a supremum over a seeded probe set with `estimated` set.
QuadraticPopulation make_population(int d, int M, int K_bar, int B, double target_gamma,
                                    double target_alpha, double target_nu_bar,
                                    const std::vector<double>& hessian_spectrum,
                                    std::uint64_t seed, double hessian_jitter = 0.0);

// Variance factor of a size-b without-replacement minibatch relative to the
// single-draw variance sigma2: (B - b) / (b (B - 1)), 1 at b = 1, 0 at b = B.
double minibatch_variance_factor(int B, int b);

// Shared-Hessian population with unstructured Gaussian linear offsets of the
// given scale. Realized constants are still exact (offsets are constant in w)
// but do not follow any target. Handy for stressing identities at small d.
QuadraticPopulation random_population(int d, int M, int K_bar, int B,
                                      const std::vector<double>& hessian_spectrum,
                                      double offset_scale, std::uint64_t seed);

}  // namespace cycfed
