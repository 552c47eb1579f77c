#include "cycfed/quadratic.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <stdexcept>

namespace cycfed {

namespace {

constexpr double kPi = 3.141592653589793238462643;

Eigen::MatrixXd random_orthogonal(int d, RngStream rng) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.gaussian();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  // Fix the sign convention so Q is a deterministic function of g.
  Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < d; ++j)
    if (r(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

void check_symmetric_pd(const Eigen::MatrixXd& h) {
  const double scale = h.norm();
  if ((h - h.transpose()).norm() > 1e-12 * (scale > 0 ? scale : 1.0))
    throw std::invalid_argument("component Hessian is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0)
    throw std::invalid_argument("component Hessian is not positive definite");
}

}  // namespace

Eigen::VectorXd ClientQuadratic::mean_linear() const {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(components.front().linear.size());
  for (const auto& c : components) b += c.linear;
  return b / static_cast<double>(components.size());
}

Eigen::MatrixXd ClientQuadratic::mean_hessian() const {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(components.front().hessian.rows(),
                                            components.front().hessian.cols());
  for (const auto& c : components) h += c.hessian;
  return h / static_cast<double>(components.size());
}

QuadraticPopulation::QuadraticPopulation(std::vector<ClientQuadratic> clients,
                                         std::vector<std::vector<int>> groups,
                                         bool shared_hessian)
    : clients_(std::move(clients)), groups_(std::move(groups)), shared_hessian_(shared_hessian) {
  if (clients_.empty()) throw std::invalid_argument("population needs at least one client");
  dim_ = static_cast<int>(clients_.front().components.front().linear.size());
  const int M = num_clients();
  // Groups must partition [M] into K_bar equal parts.
  std::vector<int> seen(M, 0);
  const int gsize = static_cast<int>(groups_.front().size());
  for (const auto& g : groups_) {
    if (static_cast<int>(g.size()) != gsize)
      throw std::invalid_argument("client groups must have equal size");
    for (int m : g) {
      if (m < 0 || m >= M || seen[m]++) throw std::invalid_argument("groups must partition [M]");
    }
  }
  if (gsize * static_cast<int>(groups_.size()) != M)
    throw std::invalid_argument("groups must cover all clients");

  for (const auto& cl : clients_)
    for (const auto& c : cl.components) check_symmetric_pd(c.hessian);

  avg_hessian_ = Eigen::MatrixXd::Zero(dim_, dim_);
  avg_linear_ = Eigen::VectorXd::Zero(dim_);
  avg_offset_ = 0.0;
  for (const auto& cl : clients_) {
    avg_hessian_ += cl.mean_hessian();
    avg_linear_ += cl.mean_linear();
    double c_mean = 0.0;
    for (const auto& c : cl.components) c_mean += c.offset;
    avg_offset_ += c_mean / static_cast<double>(cl.components.size());
  }
  avg_hessian_ /= static_cast<double>(M);
  avg_linear_ /= static_cast<double>(M);
  avg_offset_ /= static_cast<double>(M);

  compute_constants();
}

double QuadraticPopulation::client_loss(int m, const Eigen::VectorXd& w) const {
  const auto& comps = clients_.at(m).components;
  double v = 0.0;
  for (const auto& c : comps) v += c.value(w);
  return v / static_cast<double>(comps.size());
}

Eigen::VectorXd QuadraticPopulation::component_gradient(int m, int l,
                                                        const Eigen::VectorXd& w) const {
  if (w.size() != dim_) throw std::invalid_argument("dimension mismatch");
  const auto& comps = clients_.at(m).components;
  if (l < 0 || l >= static_cast<int>(comps.size()))
    throw std::out_of_range("component index out of range");
  return comps[l].gradient(w);
}

Eigen::VectorXd QuadraticPopulation::sgd_gradient(int m, const Eigen::VectorXd& w,
                                                  const std::vector<int>& idx) const {
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  for (int l : idx) g += component_gradient(m, l, w);
  return g / static_cast<double>(idx.size());
}

Eigen::VectorXd QuadraticPopulation::client_gradient(int m, const Eigen::VectorXd& w) const {
  // Same accumulation order as the full-pool minibatch path, so local GD and
  // full-batch local SGD agree bitwise.
  Eigen::VectorXd g = Eigen::VectorXd::Zero(dim_);
  const auto& comps = clients_.at(m).components;
  if (w.size() != dim_) throw std::invalid_argument("dimension mismatch");
  for (const auto& c : comps) g += c.gradient(w);
  return g / static_cast<double>(comps.size());
}

Eigen::MatrixXd QuadraticPopulation::client_hessian(int m) const {
  return clients_.at(m).mean_hessian();
}

Eigen::VectorXd QuadraticPopulation::stochastic_gradient(int m, const Eigen::VectorXd& w,
                                                         RngStream& rng) const {
  const int b = num_components(m);
  const int l = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(b)));
  return component_gradient(m, l, w);
}

double QuadraticPopulation::global_loss(const Eigen::VectorXd& w) const {
  return 0.5 * w.dot(avg_hessian_ * w) - avg_linear_.dot(w) + avg_offset_;
}

Eigen::VectorXd QuadraticPopulation::global_gradient(const Eigen::VectorXd& w) const {
  return avg_hessian_ * w - avg_linear_;
}

void QuadraticPopulation::compute_constants() {
  PopulationConstants k;
  double max_eig = 0.0;
  for (const auto& cl : clients_) {
    for (const auto& c : cl.components) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.hessian, Eigen::EigenvaluesOnly);
      max_eig = std::max(max_eig, es.eigenvalues().maxCoeff());
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_avg(avg_hessian_, Eigen::EigenvaluesOnly);
  k.L = max_eig;
  k.mu = es_avg.eigenvalues().minCoeff();
  if (k.mu <= 0.0) throw std::runtime_error("average Hessian is singular");

  k.w_star = avg_hessian_.ldlt().solve(avg_linear_);
  k.f_star = global_loss(k.w_star);

  const int M = num_clients();
  if (shared_hessian_) {
    // Gradient offsets are constant in w, so the suprema are exact.
    std::vector<Eigen::VectorXd> client_b(M);
    for (int m = 0; m < M; ++m) client_b[m] = clients_[m].mean_linear();
    Eigen::VectorXd global_b = Eigen::VectorXd::Zero(dim_);
    for (const auto& b : client_b) global_b += b;
    global_b /= static_cast<double>(M);

    for (const auto& grp : groups_) {
      Eigen::VectorXd gb = Eigen::VectorXd::Zero(dim_);
      for (int m : grp) gb += client_b[m];
      gb /= static_cast<double>(grp.size());
      k.alpha = std::max(k.alpha, (gb - global_b).norm());
      for (int m : grp) k.gamma = std::max(k.gamma, (client_b[m] - gb).norm());
    }
    for (int m = 0; m < M; ++m) {
      double var = 0.0;
      for (const auto& c : clients_[m].components) {
        const double dev = (c.linear - client_b[m]).norm();
        k.nu_bar = std::max(k.nu_bar, dev);
        var += dev * dev;
      }
      k.sigma2 = std::max(k.sigma2, var / static_cast<double>(clients_[m].components.size()));
    }
    k.estimated = false;
  } else {
    // Without a shared Hessian the deviations depend on w; report suprema
    // over a documented probe set: w*, the origin, and 16 seeded Gaussian
    // points around w*.
    std::vector<Eigen::VectorXd> probes;
    probes.push_back(k.w_star);
    probes.push_back(Eigen::VectorXd::Zero(dim_));
    RngStream probe_rng = RngStream(0xC0FFEE11ULL).child(static_cast<std::uint64_t>(dim_));
    for (int p = 0; p < 16; ++p) {
      Eigen::VectorXd w = k.w_star;
      for (int j = 0; j < dim_; ++j) w[j] += probe_rng.gaussian();
      probes.push_back(std::move(w));
    }
    for (const auto& w : probes) {
      const Eigen::VectorXd gf = global_gradient(w);
      for (const auto& grp : groups_) {
        Eigen::VectorXd gmean = Eigen::VectorXd::Zero(dim_);
        std::vector<Eigen::VectorXd> grads;
        grads.reserve(grp.size());
        for (int m : grp) {
          grads.push_back(client_gradient(m, w));
          gmean += grads.back();
        }
        gmean /= static_cast<double>(grp.size());
        k.alpha = std::max(k.alpha, (gmean - gf).norm());
        for (const auto& g : grads) k.gamma = std::max(k.gamma, (g - gmean).norm());
      }
      for (int m = 0; m < M; ++m) {
        const Eigen::VectorXd cg = client_gradient(m, w);
        double var = 0.0;
        const int B = num_components(m);
        for (int l = 0; l < B; ++l) {
          const double dev = (component_gradient(m, l, w) - cg).norm();
          k.nu_bar = std::max(k.nu_bar, dev);
          var += dev * dev;
        }
        k.sigma2 = std::max(k.sigma2, var / static_cast<double>(B));
      }
    }
    k.estimated = true;
  }
  k.nu = k.gamma + k.alpha;
  constants_ = k;
}

QuadraticPopulation make_population(int d, int M, int K_bar, int B, double target_gamma,
                                    double target_alpha, double target_nu_bar,
                                    const std::vector<double>& hessian_spectrum,
                                    std::uint64_t seed, double hessian_jitter) {
  if (K_bar < 1 || M < 1 || M % K_bar != 0)
    throw std::invalid_argument("K_bar must divide M");
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (target_gamma < 0 || target_alpha < 0 || target_nu_bar < 0)
    throw std::invalid_argument("heterogeneity targets must be >= 0");
  if (static_cast<int>(hessian_spectrum.size()) != d)
    throw std::invalid_argument("spectrum must have d entries");
  for (double s : hessian_spectrum)
    if (!(s > 0.0)) throw std::invalid_argument("spectrum entries must be positive");
  if (d < 2) throw std::invalid_argument("d must be >= 2");
  const bool heterogeneous = target_gamma > 0 || target_alpha > 0 || target_nu_bar > 0;
  if (heterogeneous && d < 4)
    throw std::invalid_argument("d >= 4 required for nonzero heterogeneity targets");
  const int gsize = M / K_bar;
  if (target_alpha > 0 && K_bar < 2)
    throw std::invalid_argument("target_alpha > 0 needs K_bar >= 2");
  if (target_gamma > 0 && gsize < 2)
    throw std::invalid_argument("target_gamma > 0 needs group size >= 2");
  if (target_nu_bar > 0 && B < 2)
    throw std::invalid_argument("target_nu_bar > 0 needs B >= 2");

  RngStream root = RngStream(seed).child(stream_tag::kPopulation);

  Eigen::MatrixXd q = random_orthogonal(d, root.child(1));
  Eigen::MatrixXd h = q * Eigen::Map<const Eigen::VectorXd>(hessian_spectrum.data(), d)
                              .asDiagonal()
                              .toDenseMatrix() *
                      q.transpose();
  h = 0.5 * (h + h.transpose());  // kill asymmetry from roundoff

  // Offset directions: group polygon in the (r0, r1) plane; client and
  // component patterns live in the remaining orthonormal columns.
  Eigen::MatrixXd r = random_orthogonal(d, root.child(2));

  Eigen::VectorXd w_star(d);
  {
    RngStream s = root.child(3);
    for (int j = 0; j < d; ++j) w_star[j] = s.gaussian();
  }

  RngStream phase_rng = root.child(4);
  RngStream jitter_rng = root.child(5);

  std::vector<ClientQuadratic> clients(M);
  std::vector<std::vector<int>> groups(K_bar);
  for (int i = 0; i < K_bar; ++i)
    for (int p = 0; p < gsize; ++p) groups[i].push_back(i * gsize + p);

  auto polygon = [](int count, int index, double radius, double phase,
                    const Eigen::VectorXd& ea, const Eigen::VectorXd& eb) -> Eigen::VectorXd {
    if (radius == 0.0 || count < 2) return Eigen::VectorXd::Zero(ea.size());
    const double th = 2.0 * kPi * index / count + phase;
    return radius * (std::cos(th) * ea + std::sin(th) * eb);
  };

  // Equal-norm zero-sum family spread over the fresh columns col_base..d-1:
  // even counts pair up +/- along successive directions, odd counts lead
  // with a 3-cycle in the first two. Spreading over several directions keeps
  // the subsampling noise full-rank instead of confining it to one plane.
  auto zero_sum_pattern = [&](int count, int index, double radius, double phase,
                              int col_base) -> Eigen::VectorXd {
    if (radius == 0.0 || count < 2) return Eigen::VectorXd::Zero(d);
    int pair_start = 0;
    if (count % 2 == 1) {
      if (index < 3) return polygon(3, index, radius, phase, r.col(col_base), r.col(col_base + 1));
      pair_start = 3;
    }
    const int ncols = d - col_base;
    const int pair = (index - pair_start) / 2;
    const Eigen::VectorXd dir = r.col(col_base + (pair % ncols));
    return ((index - pair_start) % 2 == 0 ? radius : -radius) * dir;
  };

  const Eigen::VectorXd base_b = h * w_star;
  for (int i = 0; i < K_bar; ++i) {
    const Eigen::VectorXd u = heterogeneous
                                  ? polygon(K_bar, i, target_alpha, 0.0, r.col(0), r.col(1))
                                  : Eigen::VectorXd::Zero(d).eval();
    for (int p = 0; p < gsize; ++p) {
      const int m = i * gsize + p;
      const Eigen::VectorXd v = heterogeneous
                                    ? zero_sum_pattern(gsize, p, target_gamma, 0.0, 2)
                                    : Eigen::VectorXd::Zero(d).eval();
      const double psi = phase_rng.uniform01() * 2.0 * kPi;
      Eigen::MatrixXd hm = h;
      if (hessian_jitter > 0.0) {
        const double scale = 1.0 + hessian_jitter * (2.0 * jitter_rng.uniform01() - 1.0);
        hm = scale * h;
      }
      clients[m].client_index = m;
      clients[m].components.resize(B);
      for (int l = 0; l < B; ++l) {
        const Eigen::VectorXd z = heterogeneous
                                      ? zero_sum_pattern(B, l, target_nu_bar, psi, 2)
                                      : Eigen::VectorXd::Zero(d).eval();
        clients[m].components[l].hessian = hm;
        clients[m].components[l].linear = base_b + u + v + z;
        clients[m].components[l].offset = 0.0;
      }
    }
  }
  return QuadraticPopulation(std::move(clients), std::move(groups), hessian_jitter == 0.0);
}

double minibatch_variance_factor(int B, int b) {
  if (B < 1 || b < 1 || b > B) throw std::invalid_argument("need 1 <= b <= B");
  if (b == B) return 0.0;
  return static_cast<double>(B - b) / (static_cast<double>(b) * (B - 1));
}

QuadraticPopulation random_population(int d, int M, int K_bar, int B,
                                      const std::vector<double>& hessian_spectrum,
                                      double offset_scale, std::uint64_t seed) {
  if (K_bar < 1 || M < 1 || M % K_bar != 0)
    throw std::invalid_argument("K_bar must divide M");
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (static_cast<int>(hessian_spectrum.size()) != d)
    throw std::invalid_argument("spectrum must have d entries");
  for (double s : hessian_spectrum)
    if (!(s > 0.0)) throw std::invalid_argument("spectrum entries must be positive");

  RngStream root = RngStream(seed).child(stream_tag::kPopulation).child(99);
  Eigen::MatrixXd q = random_orthogonal(d, root.child(1));
  Eigen::MatrixXd h = q * Eigen::Map<const Eigen::VectorXd>(hessian_spectrum.data(), d)
                              .asDiagonal()
                              .toDenseMatrix() *
                      q.transpose();
  h = 0.5 * (h + h.transpose());

  RngStream off = root.child(2);
  Eigen::VectorXd base_b(d);
  for (int j = 0; j < d; ++j) base_b[j] = off.gaussian();

  const int gsize = M / K_bar;
  std::vector<std::vector<int>> groups(K_bar);
  for (int i = 0; i < K_bar; ++i)
    for (int p = 0; p < gsize; ++p) groups[i].push_back(i * gsize + p);

  std::vector<ClientQuadratic> clients(M);
  for (int m = 0; m < M; ++m) {
    clients[m].client_index = m;
    clients[m].components.resize(B);
    for (int l = 0; l < B; ++l) {
      Eigen::VectorXd b = base_b;
      for (int j = 0; j < d; ++j) b[j] += offset_scale * off.gaussian();
      clients[m].components[l].hessian = h;
      clients[m].components[l].linear = std::move(b);
    }
  }
  return QuadraticPopulation(std::move(clients), std::move(groups), true);
}

}  // namespace cycfed
