#include "cycfed/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace cycfed {

namespace {

// Orthonormal directions for the class means: first C columns of a seeded
// random orthogonal matrix.
Eigen::MatrixXd orthonormal_columns(int d, int count, RngStream rng) {
  Eigen::MatrixXd g(d, count);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < count; ++j) g(i, j) = rng.gaussian();
  // Gram-Schmidt is enough at these sizes and keeps the output a
  // deterministic function of g.
  for (int j = 0; j < count; ++j) {
    for (int k = 0; k < j; ++k) g.col(j) -= g.col(k).dot(g.col(j)) * g.col(k);
    const double nrm = g.col(j).norm();
    if (nrm < 1e-12) throw std::runtime_error("degenerate direction draw");
    g.col(j) /= nrm;
  }
  return g;
}

// Gamma(shape, 1) sampler (Marsaglia-Tsang, with the boost for shape < 1).
double gamma_draw(double shape, RngStream& rng) {
  if (shape < 1.0) {
    const double u = rng.uniform01();
    return gamma_draw(shape + 1.0, rng) * std::pow(u > 0 ? u : 1e-300, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = rng.gaussian();
    double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    v = v * v * v;
    const double u = rng.uniform01();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (u > 0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

std::vector<double> dirichlet_draw(int n, double concentration, RngStream& rng) {
  std::vector<double> p(n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    p[i] = gamma_draw(concentration, rng);
    sum += p[i];
  }
  if (sum <= 0.0) {
    std::fill(p.begin(), p.end(), 1.0 / n);
    return p;
  }
  for (double& v : p) v /= sum;
  return p;
}

// Integer quotas summing to `total` from fractional proportions.
std::vector<int> largest_remainder(const std::vector<double>& p, int total) {
  const int n = static_cast<int>(p.size());
  std::vector<int> quota(n);
  std::vector<std::pair<double, int>> rema(n);
  int assigned = 0;
  for (int i = 0; i < n; ++i) {
    const double exact = p[i] * total;
    quota[i] = static_cast<int>(std::floor(exact));
    assigned += quota[i];
    rema[i] = {exact - quota[i], i};
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;  // ties keep lower index first
  });
  for (int r = 0; r < total - assigned; ++r) quota[rema[r % n].second] += 1;
  return quota;
}

}  // namespace

LabeledDataset make_gaussian_mixture(int classes, int dim, int n, double separation,
                                     std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("need at least 2 classes");
  if (n < 10 * classes) throw std::invalid_argument("need n >= 10*C samples");
  if (dim < classes) throw std::invalid_argument("need dim >= classes for orthogonal means");
  RngStream root = RngStream(seed).child(stream_tag::kPopulation).child(7);

  // Pairwise mean distance = separation for orthonormal directions scaled
  // by separation / sqrt(2).
  Eigen::MatrixXd dirs = orthonormal_columns(dim, classes, root.child(1));
  dirs *= separation / std::sqrt(2.0);

  LabeledDataset ds;
  ds.classes = classes;
  ds.features.resize(n, dim);
  ds.labels.resize(n);
  RngStream noise = root.child(2);
  int row = 0;
  for (int c = 0; c < classes; ++c) {
    const int count = n / classes + (c < n % classes ? 1 : 0);
    for (int s = 0; s < count; ++s, ++row) {
      ds.labels[row] = c;
      for (int j = 0; j < dim; ++j) ds.features(row, j) = dirs(j, c) + noise.gaussian();
    }
  }

  // Standardize per coordinate.
  for (int j = 0; j < dim; ++j) {
    const double mean = ds.features.col(j).mean();
    ds.features.col(j).array() -= mean;
    const double sd = std::sqrt(ds.features.col(j).squaredNorm() / n);
    if (sd > 1e-12) ds.features.col(j) /= sd;
  }
  if (!ds.features.allFinite()) throw std::runtime_error("non-finite features");
  return ds;
}

std::vector<ClientShard> dirichlet_partition(const LabeledDataset& ds, int M,
                                             double concentration, int B, std::uint64_t seed) {
  if (!(concentration > 0.0)) throw std::invalid_argument("concentration must be > 0");
  if (M < 1) throw std::invalid_argument("M must be >= 1");
  const int n = ds.size();
  if (n < M) throw std::invalid_argument("fewer samples than clients");

  std::vector<std::vector<int>> by_class(ds.classes);
  for (int r = 0; r < n; ++r) by_class[ds.labels[r]].push_back(r);

  RngStream root = RngStream(seed).child(stream_tag::kPopulation).child(8);
  std::vector<std::vector<int>> assign;
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    assign.assign(M, {});
    RngStream draw = root.child(static_cast<std::uint64_t>(attempt));
    for (int c = 0; c < ds.classes; ++c) {
      const std::vector<double> p = dirichlet_draw(M, concentration, draw);
      const std::vector<int> quota = largest_remainder(p, static_cast<int>(by_class[c].size()));
      int pos = 0;
      for (int m = 0; m < M; ++m)
        for (int q = 0; q < quota[m]; ++q) assign[m].push_back(by_class[c][pos++]);
    }
    ok = std::all_of(assign.begin(), assign.end(),
                     [](const std::vector<int>& a) { return !a.empty(); });
  }
  if (!ok) {
    // Keep the last draw's structure; hand each empty client one sample,
    // cycling over the currently largest shards.
    for (int m = 0; m < M; ++m) {
      if (!assign[m].empty()) continue;
      int donor = -1;
      for (int j = 0; j < M; ++j)
        if (assign[j].size() > 1 &&
            (donor < 0 || assign[j].size() > assign[donor].size()))
          donor = j;
      if (donor < 0) throw std::runtime_error("cannot populate every client");
      assign[m].push_back(assign[donor].back());
      assign[donor].pop_back();
    }
  }

  std::vector<ClientShard> shards(M);
  RngStream shuffle_root = root.child(1000);
  for (int m = 0; m < M; ++m) {
    const int sz = static_cast<int>(assign[m].size());
    if (sz < B) throw std::invalid_argument("shard smaller than component count B");
    // One seeded shuffle fixes the component contents for the whole run.
    std::vector<int> perm = shuffle_root.child(static_cast<std::uint64_t>(m)).permutation(sz);
    shards[m].rows.resize(sz);
    for (int j = 0; j < sz; ++j) shards[m].rows[j] = assign[m][perm[j]];
    shards[m].component_boundaries.resize(B + 1);
    for (int l = 0; l <= B; ++l)
      shards[m].component_boundaries[l] = static_cast<int>(static_cast<long long>(sz) * l / B);
  }
  return shards;
}

int dominant_label(const LabeledDataset& ds, const ClientShard& shard) {
  std::vector<int> counts(ds.classes, 0);
  for (int r : shard.rows) counts[ds.labels[r]]++;
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

std::vector<std::vector<int>> group_by_label_affinity(const LabeledDataset& ds,
                                                      const std::vector<ClientShard>& shards,
                                                      int K_bar, GroupingMode mode,
                                                      std::uint64_t seed) {
  const int M = static_cast<int>(shards.size());
  if (K_bar < 1 || M % K_bar != 0) throw std::invalid_argument("K_bar must divide M");
  std::vector<int> order(M);
  std::iota(order.begin(), order.end(), 0);
  if (mode == GroupingMode::LabelSorted) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return dominant_label(ds, shards[a]) < dominant_label(ds, shards[b]);
    });
  } else {
    order = RngStream(seed).child(stream_tag::kPopulation).child(9).permutation(M);
  }
  const int gsize = M / K_bar;
  std::vector<std::vector<int>> groups(K_bar);
  for (int i = 0; i < K_bar; ++i) {
    groups[i].assign(order.begin() + i * gsize, order.begin() + (i + 1) * gsize);
    std::sort(groups[i].begin(), groups[i].end());
  }
  return groups;
}

ClassificationPopulation::ClassificationPopulation(LabeledDataset ds,
                                                   std::vector<ClientShard> shards,
                                                   std::vector<std::vector<int>> groups,
                                                   double l2_strength)
    : ds_(std::move(ds)),
      shards_(std::move(shards)),
      groups_(std::move(groups)),
      l2_(l2_strength) {
  if (!(l2_ > 0.0)) throw std::invalid_argument("l2 strength must be > 0");
  model_dim_ = ds_.classes * ds_.dim();
}

namespace {

// Softmax probabilities for one row; returns the loss term -log p_y.
double softmax_row(const Eigen::VectorXd& w, const Eigen::MatrixXd& x, int row, int classes,
                   int d, int label, Eigen::VectorXd* probs) {
  Eigen::VectorXd logits(classes);
  for (int c = 0; c < classes; ++c) {
    double z = 0.0;
    for (int j = 0; j < d; ++j) z += w[c * d + j] * x(row, j);
    logits[c] = z;
  }
  const double zmax = logits.maxCoeff();
  double denom = 0.0;
  for (int c = 0; c < classes; ++c) denom += std::exp(logits[c] - zmax);
  if (probs) {
    probs->resize(classes);
    for (int c = 0; c < classes; ++c) (*probs)[c] = std::exp(logits[c] - zmax) / denom;
  }
  return -(logits[label] - zmax - std::log(denom));
}

}  // namespace

Eigen::VectorXd ClassificationPopulation::ce_gradient(int m, const Eigen::VectorXd& w,
                                                      const std::vector<int>& positions) const {
  const int d = ds_.dim();
  const int C = ds_.classes;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model_dim_);
  Eigen::VectorXd probs;
  for (int pos : positions) {
    const int row = shards_[m].rows.at(pos);
    softmax_row(w, ds_.features, row, C, d, ds_.labels[row], &probs);
    probs[ds_.labels[row]] -= 1.0;
    for (int c = 0; c < C; ++c)
      for (int j = 0; j < d; ++j) g[c * d + j] += probs[c] * ds_.features(row, j);
  }
  return g / static_cast<double>(positions.size());
}

double ClassificationPopulation::client_loss(int m, const Eigen::VectorXd& w) const {
  const int d = ds_.dim();
  double loss = 0.0;
  for (int row : shards_.at(m).rows)
    loss += softmax_row(w, ds_.features, row, ds_.classes, d, ds_.labels[row], nullptr);
  loss /= static_cast<double>(shards_[m].rows.size());
  return loss + 0.5 * l2_ * w.squaredNorm();
}

Eigen::VectorXd ClassificationPopulation::client_gradient(int m, const Eigen::VectorXd& w) const {
  std::vector<int> all(shards_.at(m).rows.size());
  std::iota(all.begin(), all.end(), 0);
  return sgd_gradient(m, w, all);
}

Eigen::VectorXd ClassificationPopulation::component_gradient(int m, int l,
                                                             const Eigen::VectorXd& w) const {
  const auto& shard = shards_.at(m);
  if (l < 0 || l >= shard.num_components()) throw std::out_of_range("component out of range");
  std::vector<int> positions;
  for (int p = shard.component_boundaries[l]; p < shard.component_boundaries[l + 1]; ++p)
    positions.push_back(p);
  return ce_gradient(m, w, positions) + l2_ * w;
}

Eigen::VectorXd ClassificationPopulation::sgd_gradient(int m, const Eigen::VectorXd& w,
                                                       const std::vector<int>& idx) const {
  return ce_gradient(m, w, idx) + l2_ * w;
}

double ClassificationPopulation::global_loss(const Eigen::VectorXd& w) const {
  double loss = 0.0;
  for (int m = 0; m < num_clients(); ++m) loss += client_loss(m, w);
  return loss / num_clients();
}

Eigen::VectorXd ClassificationPopulation::global_gradient(const Eigen::VectorXd& w) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(model_dim_);
  for (int m = 0; m < num_clients(); ++m) g += client_gradient(m, w);
  return g / num_clients();
}

double ClassificationPopulation::accuracy(const Eigen::VectorXd& w) const {
  const int d = ds_.dim();
  const int C = ds_.classes;
  int hits = 0;
  for (int row = 0; row < ds_.size(); ++row) {
    int best = 0;
    double best_z = -1e300;
    for (int c = 0; c < C; ++c) {
      double z = 0.0;
      for (int j = 0; j < d; ++j) z += w[c * d + j] * ds_.features(row, j);
      if (z > best_z) {
        best_z = z;
        best = c;
      }
    }
    if (best == ds_.labels[row]) ++hits;
  }
  return static_cast<double>(hits) / ds_.size();
}

void write_shards_csv(const std::vector<ClientShard>& shards, std::ostream& os) {
  os << "client,component,sample_index\n";
  for (size_t m = 0; m < shards.size(); ++m) {
    const auto& s = shards[m];
    for (int l = 0; l < s.num_components(); ++l)
      for (int p = s.component_boundaries[l]; p < s.component_boundaries[l + 1]; ++p)
        os << m << ',' << l << ',' << s.rows[p] << '\n';
  }
}

}  // namespace cycfed
