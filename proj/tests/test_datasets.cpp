#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cycfed/datasets.hpp"
#include "doctest.h"

using namespace cycfed;

namespace {

// Full-batch GD on the pooled objective; the training oracle for the
// mixture sanity checks.
Eigen::VectorXd train_global(const ClassificationPopulation& pop, double eta, int steps) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(pop.dim());
  for (int s = 0; s < steps; ++s) w -= eta * pop.global_gradient(w);
  return w;
}

ClassificationPopulation single_client(LabeledDataset ds, double l2) {
  const int n = ds.size();
  std::vector<ClientShard> shards(1);
  shards[0].rows.resize(n);
  std::iota(shards[0].rows.begin(), shards[0].rows.end(), 0);
  shards[0].component_boundaries = {0, n};
  return ClassificationPopulation(std::move(ds), std::move(shards), {{0}}, l2);
}

std::vector<double> label_fractions(const LabeledDataset& ds, const ClientShard& shard) {
  std::vector<double> f(ds.classes, 0.0);
  for (int r : shard.rows) f[ds.labels[r]] += 1.0;
  for (double& v : f) v /= static_cast<double>(shard.rows.size());
  return f;
}

}  // namespace

TEST_CASE("gaussian mixture: determinism, standardization, class coverage") {
  const LabeledDataset a = make_gaussian_mixture(3, 5, 120, 2.0, 42);
  const LabeledDataset b = make_gaussian_mixture(3, 5, 120, 2.0, 42);
  CHECK(a.features == b.features);
  CHECK(a.labels == b.labels);

  std::set<int> seen(a.labels.begin(), a.labels.end());
  CHECK(seen.size() == 3);
  CHECK(a.features.allFinite());
  for (int j = 0; j < 5; ++j) {
    CHECK(std::abs(a.features.col(j).mean()) <= 1e-12);
    CHECK(a.features.col(j).squaredNorm() / a.size() == doctest::Approx(1.0).epsilon(1e-9));
  }
  CHECK_THROWS(make_gaussian_mixture(1, 5, 100, 1.0, 1));   // C >= 2
  CHECK_THROWS(make_gaussian_mixture(3, 5, 20, 1.0, 1));    // n >= 10 C
}

TEST_CASE("separation drives trainable accuracy") {
  // Overlapping classes: a trained model stays near chance level.
  {
    const LabeledDataset ds = make_gaussian_mixture(4, 6, 400, 0.0, 7);
    const ClassificationPopulation pop = single_client(ds, 1e-3);
    const Eigen::VectorXd w = train_global(pop, 0.5, 300);
    CHECK(pop.accuracy(w) <= 0.25 + 0.1);
  }
  // Well-separated two-class problem: a linear classifier fits well.
  {
    const LabeledDataset ds = make_gaussian_mixture(2, 2, 300, 6.0, 7);
    const ClassificationPopulation pop = single_client(ds, 1e-3);
    const Eigen::VectorXd w = train_global(pop, 0.5, 300);
    CHECK(pop.accuracy(w) >= 0.95);
  }
}

TEST_CASE("logistic gradients match central finite differences") {
  const LabeledDataset ds = make_gaussian_mixture(3, 4, 90, 2.0, 9);
  std::vector<ClientShard> shards = dirichlet_partition(ds, 3, 1.0, 2, 9);
  const ClassificationPopulation pop(ds, shards, group_by_label_affinity(ds, shards, 3,
                                                                         GroupingMode::Random, 9),
                                     1e-2);
  RngStream rng(4);
  Eigen::VectorXd w(pop.dim());
  for (int j = 0; j < w.size(); ++j) w[j] = 0.3 * rng.gaussian();
  const Eigen::VectorXd g = pop.client_gradient(1, w);
  const double eps = 1e-5;
  for (int j = 0; j < w.size(); j += 3) {
    Eigen::VectorXd wp = w, wm = w;
    wp[j] += eps;
    wm[j] -= eps;
    const double fd = (pop.client_loss(1, wp) - pop.client_loss(1, wm)) / (2 * eps);
    CHECK(std::abs(fd - g[j]) <= 1e-5 * (1 + std::abs(g[j])));
  }
}

TEST_CASE("component gradients average to the client gradient (regularizer once)") {
  const LabeledDataset ds = make_gaussian_mixture(3, 4, 120, 2.0, 11);
  std::vector<ClientShard> shards = dirichlet_partition(ds, 4, 1.0, 3, 11);
  const ClassificationPopulation pop(ds, shards,
                                     group_by_label_affinity(ds, shards, 2,
                                                             GroupingMode::Random, 11),
                                     1e-2);
  RngStream rng(5);
  Eigen::VectorXd w(pop.dim());
  for (int j = 0; j < w.size(); ++j) w[j] = 0.2 * rng.gaussian();
  for (int m = 0; m < 4; ++m) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(pop.dim());
    const int b = pop.num_components(m);
    // components partition the shard but may have unequal sizes; the average
    // weighted by size reproduces the shard mean plus one regularizer.
    int total = 0;
    mean.setZero();
    for (int l = 0; l < b; ++l) {
      const int size = pop.shard(m).component_boundaries[l + 1] -
                       pop.shard(m).component_boundaries[l];
      mean += (pop.component_gradient(m, l, w) - 1e-2 * w) * size;
      total += size;
    }
    mean = mean / total + 1e-2 * w;
    CHECK((mean - pop.client_gradient(m, w)).norm() <= 1e-12 * (1 + mean.norm()));
  }
}

TEST_CASE("dirichlet partition: completeness, non-empty components, determinism") {
  const LabeledDataset ds = make_gaussian_mixture(4, 6, 400, 2.0, 13);
  const std::vector<ClientShard> shards = dirichlet_partition(ds, 8, 0.5, 2, 13);
  std::vector<int> seen;
  for (const auto& s : shards) {
    CHECK(!s.rows.empty());
    CHECK(s.num_components() == 2);
    for (int l = 0; l < s.num_components(); ++l)
      CHECK(s.component_boundaries[l + 1] > s.component_boundaries[l]);
    seen.insert(seen.end(), s.rows.begin(), s.rows.end());
  }
  std::sort(seen.begin(), seen.end());
  CHECK(static_cast<int>(seen.size()) == ds.size());
  CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());

  const std::vector<ClientShard> again = dirichlet_partition(ds, 8, 0.5, 2, 13);
  for (size_t m = 0; m < shards.size(); ++m) CHECK(shards[m].rows == again[m].rows);
}

TEST_CASE("tiny pool: M=4, n=8 uses every index exactly once") {
  LabeledDataset ds;
  ds.classes = 2;
  ds.features = Eigen::MatrixXd::Random(8, 2);
  ds.labels = {0, 0, 0, 0, 1, 1, 1, 1};
  const std::vector<ClientShard> shards = dirichlet_partition(ds, 4, 1.0, 1, 3);
  std::vector<int> seen;
  for (const auto& s : shards) seen.insert(seen.end(), s.rows.begin(), s.rows.end());
  std::sort(seen.begin(), seen.end());
  CHECK(seen == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

  CHECK_THROWS(dirichlet_partition(ds, 9, 1.0, 1, 3));  // n < M

  // n = M forces the empty-client fallback: every client ends up with
  // exactly one sample and the partition property still holds.
  const std::vector<ClientShard> tight = dirichlet_partition(ds, 8, 0.2, 1, 3);
  std::vector<int> all;
  for (const auto& s : tight) {
    CHECK(s.rows.size() == 1);
    all.push_back(s.rows[0]);
  }
  std::sort(all.begin(), all.end());
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("large concentration gives near-uniform per-client label fractions") {
  const LabeledDataset ds = make_gaussian_mixture(4, 6, 2000, 2.0, 17);
  const std::vector<ClientShard> shards = dirichlet_partition(ds, 10, 1e6, 1, 17);
  std::vector<double> global(4, 0.0);
  for (int r = 0; r < ds.size(); ++r) global[ds.labels[r]] += 1.0 / ds.size();
  for (const auto& s : shards) {
    const std::vector<double> f = label_fractions(ds, s);
    for (int c = 0; c < 4; ++c) CHECK(std::abs(f[c] - global[c]) <= 0.05);
  }
}

TEST_CASE("smaller concentration means larger heterogeneity (TV distance ordering)") {
  auto mean_pairwise_tv = [](const LabeledDataset& ds, const std::vector<ClientShard>& shards) {
    double total = 0.0;
    int pairs = 0;
    for (size_t a = 0; a < shards.size(); ++a) {
      const auto fa = label_fractions(ds, shards[a]);
      for (size_t b = a + 1; b < shards.size(); ++b) {
        const auto fb = label_fractions(ds, shards[b]);
        double tv = 0.0;
        for (size_t c = 0; c < fa.size(); ++c) tv += std::abs(fa[c] - fb[c]);
        total += 0.5 * tv;
        ++pairs;
      }
    }
    return total / pairs;
  };
  const LabeledDataset ds = make_gaussian_mixture(4, 6, 1500, 2.0, 19);
  int ordered = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const double tv_het = mean_pairwise_tv(ds, dirichlet_partition(ds, 10, 0.5, 1, seed));
    const double tv_hom = mean_pairwise_tv(ds, dirichlet_partition(ds, 10, 2.0, 1, seed));
    if (tv_het > tv_hom) ++ordered;
  }
  CHECK(ordered == 5);
}

TEST_CASE("grouping: label-sorted on pure shards, K_bar=1, dispersion ordering") {
  // Pure-label shards 0,0,1,1 -> label-sorted groups split by label.
  LabeledDataset ds;
  ds.classes = 2;
  ds.features = Eigen::MatrixXd::Random(8, 2);
  ds.labels = {0, 0, 1, 1, 0, 0, 1, 1};
  std::vector<ClientShard> shards(4);
  shards[0].rows = {0, 1};
  shards[1].rows = {4, 5};
  shards[2].rows = {2, 3};
  shards[3].rows = {6, 7};
  for (auto& s : shards) s.component_boundaries = {0, 2};
  const auto groups = group_by_label_affinity(ds, shards, 2, GroupingMode::LabelSorted, 1);
  CHECK(groups[0] == std::vector<int>{0, 1});  // the label-0 clients
  CHECK(groups[1] == std::vector<int>{2, 3});  // the label-1 clients

  const auto single = group_by_label_affinity(ds, shards, 1, GroupingMode::Random, 1);
  CHECK(single.size() == 1);
  CHECK(single[0] == std::vector<int>{0, 1, 2, 3});
}

TEST_CASE("label-sorted grouping lowers within-group gradient dispersion vs random") {
  const LabeledDataset ds = make_gaussian_mixture(4, 6, 1200, 3.0, 23);
  int wins = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const std::vector<ClientShard> shards = dirichlet_partition(ds, 12, 0.3, 1, seed);
    // Mean within-group dispersion near the uninformed model, where client
    // gradients are driven by their label mix.
    auto dispersion = [&](GroupingMode mode) {
      const ClassificationPopulation pop(
          ds, shards, group_by_label_affinity(ds, shards, 4, mode, seed), 1e-3);
      RngStream rng(seed);
      double total = 0.0;
      int count = 0;
      for (int p = 0; p < 5; ++p) {
        Eigen::VectorXd w(pop.dim());
        for (int j = 0; j < w.size(); ++j) w[j] = 0.05 * rng.gaussian();
        for (const auto& grp : pop.groups()) {
          Eigen::VectorXd mean = Eigen::VectorXd::Zero(pop.dim());
          std::vector<Eigen::VectorXd> grads;
          for (int m : grp) {
            grads.push_back(pop.client_gradient(m, w));
            mean += grads.back();
          }
          mean /= static_cast<double>(grp.size());
          for (const auto& g : grads) {
            total += (g - mean).norm();
            ++count;
          }
        }
      }
      return total / count;
    };
    if (dispersion(GroupingMode::LabelSorted) < dispersion(GroupingMode::Random)) ++wins;
  }
  CHECK(wins >= 4);
}

TEST_CASE("local objectives are l2-strongly convex") {
  const LabeledDataset ds = make_gaussian_mixture(3, 4, 150, 2.0, 29);
  std::vector<ClientShard> shards = dirichlet_partition(ds, 3, 1.0, 1, 29);
  const double l2 = 5e-2;
  const ClassificationPopulation pop(
      ds, shards, group_by_label_affinity(ds, shards, 1, GroupingMode::Random, 29), l2);
  RngStream rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::VectorXd w1(pop.dim()), w2(pop.dim());
    for (int j = 0; j < w1.size(); ++j) {
      w1[j] = 0.5 * rng.gaussian();
      w2[j] = 0.5 * rng.gaussian();
    }
    const int m = static_cast<int>(rng.uniform_below(3));
    const double lhs = pop.client_loss(m, w1) - pop.client_loss(m, w2) -
                       pop.client_gradient(m, w2).dot(w1 - w2);
    CHECK(lhs >= 0.5 * l2 * (w1 - w2).squaredNorm() - 1e-9);
  }
}
