#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "cycfed/population.hpp"
#include "cycfed/rng.hpp"

namespace cycfed {

// Synthetic labeled pool: features standardized to zero mean / unit variance
// per coordinate, labels in [0, classes).
struct LabeledDataset {
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;
  int classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

// One client's slice of the pool: row indices plus B+1 offsets splitting the
// (already shuffled) index list into disjoint contiguous components.
struct ClientShard {
  std::vector<int> rows;
  std::vector<int> component_boundaries;

  int num_components() const { return static_cast<int>(component_boundaries.size()) - 1; }
};

// n points from C spherical unit-variance Gaussians whose means sit at
// mutually orthogonal directions scaled so every pair of means is
// `separation` apart. Class sizes are as equal as possible; features are
// standardized afterwards. Deterministic per seed.
LabeledDataset make_gaussian_mixture(int classes, int dim, int n, double separation,
                                     std::uint64_t seed);

// Dirichlet label partition: per class, client proportions are drawn from a
// symmetric Dirichlet(concentration) and samples assigned by largest-
// remainder rounding. Draws are retried up to 100 times until every client
// owns at least one sample; after that the pool is dealt round-robin.
// Each shard is then shuffled once and cut into B equal-as-possible
// contiguous components (fixed for the whole run).
std::vector<ClientShard> dirichlet_partition(const LabeledDataset& ds, int M,
                                             double concentration, int B, std::uint64_t seed);

enum class GroupingMode { Random, LabelSorted };

// sigma(1..K_bar): label-sorted mode orders clients by dominant label and
// chunks consecutively (the small intra-group-heterogeneity regime); random
// mode permutes then chunks (control).
std::vector<std::vector<int>> group_by_label_affinity(const LabeledDataset& ds,
                                                      const std::vector<ClientShard>& shards,
                                                      int K_bar, GroupingMode mode,
                                                      std::uint64_t seed = 0);

// Regularized multinomial logistic objectives over the shards. The model is
// a C x d weight matrix stored row-major as a C*d vector; the local loss is
// mean cross-entropy over the shard plus (l2/2)||W||^2, so every client
// objective is l2-strongly convex and mu = l2.
//
// A component gradient is the mean sample gradient over that component's
// rows plus the full regularizer gradient, so (1/B) sum_l grad F_{m,l} =
// grad F_m holds exactly.
class ClassificationPopulation final : public Population {
 public:
  ClassificationPopulation(LabeledDataset ds, std::vector<ClientShard> shards,
                           std::vector<std::vector<int>> groups, double l2_strength);

  int dim() const override { return model_dim_; }
  int num_clients() const override { return static_cast<int>(shards_.size()); }
  const std::vector<std::vector<int>>& groups() const override { return groups_; }
  const LabeledDataset& dataset() const { return ds_; }
  const ClientShard& shard(int m) const { return shards_.at(m); }
  double l2_strength() const { return l2_; }

  double client_loss(int m, const Eigen::VectorXd& w) const override;
  Eigen::VectorXd client_gradient(int m, const Eigen::VectorXd& w) const override;

  int num_components(int m) const override { return shards_.at(m).num_components(); }
  Eigen::VectorXd component_gradient(int m, int l, const Eigen::VectorXd& w) const override;

  int sgd_pool_size(int m) const override {
    return static_cast<int>(shards_.at(m).rows.size());
  }
  Eigen::VectorXd sgd_gradient(int m, const Eigen::VectorXd& w,
                               const std::vector<int>& idx) const override;

  double global_loss(const Eigen::VectorXd& w) const override;
  Eigen::VectorXd global_gradient(const Eigen::VectorXd& w) const override;

  // Fraction of pool rows whose argmax logit matches the label.
  double accuracy(const Eigen::VectorXd& w) const;

 private:
  // Mean cross-entropy gradient over the given shard positions, no
  // regularizer. `positions` index into shard.rows.
  Eigen::VectorXd ce_gradient(int m, const Eigen::VectorXd& w,
                              const std::vector<int>& positions) const;

  LabeledDataset ds_;
  std::vector<ClientShard> shards_;
  std::vector<std::vector<int>> groups_;
  double l2_;
  int model_dim_;
};

// Dominant label of a shard (ties to the smaller label).
int dominant_label(const LabeledDataset& ds, const ClientShard& shard);

// Shard table as CSV rows: client,component,sample_index.
void write_shards_csv(const std::vector<ClientShard>& shards, std::ostream& os);

}  // namespace cycfed
