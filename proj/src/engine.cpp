#include "cycfed/engine.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ostream>

namespace cycfed {

namespace {

constexpr double kDivergenceGuard = 1e12;

void check_finite(const Eigen::VectorXd& w, int round) {
  if (!w.allFinite() || w.norm() > kDivergenceGuard) throw DivergenceError(round);
}

}  // namespace

std::string mode_name(Mode m) {
  switch (m) {
    case Mode::GD: return "GD";
    case Mode::SGD: return "SGD";
    case Mode::SSGD: return "SSGD";
  }
  return "GD";
}

Mode mode_from_name(const std::string& s) {
  if (s == "GD") return Mode::GD;
  if (s == "SGD") return Mode::SGD;
  if (s == "SSGD") return Mode::SSGD;
  throw std::invalid_argument("unknown mode: " + s);
}

Eigen::VectorXd local_update_gd(const Population& pop, int m, const Eigen::VectorXd& w,
                                double eta) {
  Eigen::VectorXd g = pop.client_gradient(m, w);
  if (!g.allFinite()) throw DivergenceError(-1);
  return w - eta * g;
}

Eigen::VectorXd local_update_sgd(const Population& pop, int m, const Eigen::VectorXd& w,
                                 double eta, int tau, int b, RngStream rng) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  const int pool = pop.sgd_pool_size(m);
  if (b < 1 || b > pool) throw std::invalid_argument("minibatch size must be in [1, pool size]");
  Eigen::VectorXd wm = w;
  for (int l = 0; l < tau; ++l) {
    const std::vector<int> idx = rng.sample_without_replacement(pool, b);
    wm -= eta * pop.sgd_gradient(m, wm, idx);
    check_finite(wm, -1);
  }
  return wm;
}

Eigen::VectorXd local_update_ssgd(const Population& pop, int m, const Eigen::VectorXd& w,
                                  double eta, const std::vector<int>& pi) {
  const int b = pop.num_components(m);
  if (static_cast<int>(pi.size()) != b)
    throw std::invalid_argument("pi must be a permutation of [0, B)");
  Eigen::VectorXd wm = w;
  for (int l = 0; l < b; ++l) {
    wm -= eta * pop.component_gradient(m, pi[l], wm);
    check_finite(wm, -1);
  }
  return wm;
}

RunLog run(const Population& pop, const CycleSchedule& sched, const RunConfig& cfg) {
  const int k_bar = sched.num_groups();
  const int n = cfg.clients_per_round;
  if (cfg.cycles < 0) throw std::invalid_argument("K must be >= 0");
  if (!std::isfinite(cfg.eta) || cfg.eta < 0.0)
    throw std::invalid_argument("eta must be finite and >= 0");

  Eigen::VectorXd w =
      cfg.init.size() > 0 ? cfg.init : Eigen::VectorXd::Zero(pop.dim()).eval();
  if (w.size() != pop.dim()) throw std::invalid_argument("initial model dimension mismatch");

  RunLog log;
  log.eta_local = cfg.eta;
  log.f_star_known = pop.optimal_value().has_value();
  log.traversal_order = sched.order();

  const RngStream root(cfg.seed);
  const RngStream select_root = root.child(stream_tag::kSelection);
  const RngStream perm_root = root.child(stream_tag::kPermutation);
  const RngStream batch_root = root.child(stream_tag::kMinibatch);

  const double f_star = pop.optimal_value().value_or(0.0);
  const int total_rounds = cfg.cycles * k_bar;
  log.records.reserve(total_rounds);
  long long evals = 0;

  for (int t = 0; t < total_rounds; ++t) {
    const auto [k, i] = round_to_indices(t, k_bar);
    const std::vector<int> selected = sched.select_round_clients(
        k, i, n, select_root.child({static_cast<std::uint64_t>(k), static_cast<std::uint64_t>(i)}));

    // Client updates are independent given w; summation runs in ascending
    // client order so results do not depend on execution order.
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(w.size());
    Eigen::VectorXd delta_sum = Eigen::VectorXd::Zero(w.size());
    for (int m : selected) {
      Eigen::VectorXd wm;
      switch (cfg.mode) {
        case Mode::GD:
          wm = local_update_gd(pop, m, w, cfg.eta);
          evals += 1;
          break;
        case Mode::SGD:
          wm = local_update_sgd(pop, m, w, cfg.eta, cfg.local_steps, cfg.minibatch,
                                batch_root.child({static_cast<std::uint64_t>(k),
                                                  static_cast<std::uint64_t>(i),
                                                  static_cast<std::uint64_t>(m)}));
          evals += cfg.local_steps;
          break;
        case Mode::SSGD: {
          const std::vector<int> pi =
              draw_permutation(pop.num_components(m),
                               perm_root.child({static_cast<std::uint64_t>(k),
                                                static_cast<std::uint64_t>(m)}));
          wm = local_update_ssgd(pop, m, w, cfg.eta, pi);
          evals += pop.num_components(m);
          break;
        }
      }
      sum += wm;
      delta_sum += wm - w;
    }
    Eigen::VectorXd w_next = sum / static_cast<double>(n);
    check_finite(w_next, t);

    // Model averaging must coincide with the Delta-form of the update rule,
    // w + (1/N) sum_m (w_m - w), up to roundoff.
    {
      const Eigen::VectorXd w_delta = w + delta_sum / static_cast<double>(n);
      const double tol = 1e-12 * (1.0 + w_next.norm());
      if ((w_next - w_delta).norm() > tol)
        throw std::logic_error("aggregation mismatch between averaging and delta form");
    }
    w = std::move(w_next);

    RoundRecord rec;
    rec.t = t;
    rec.k = k;
    rec.i = i;
    rec.clients = selected;
    const double f = pop.global_loss(w);
    rec.loss_gap = log.f_star_known ? f - f_star : f;
    rec.grad_norm = pop.global_gradient(w).norm();
    rec.evals = evals;
    log.records.push_back(std::move(rec));
    if (cfg.record_iterates) log.iterates.push_back(w);
  }
  log.final_model = std::move(w);
  return log;
}

Eigen::VectorXd run_cycle_gd(const Population& pop, const Eigen::VectorXd& w0,
                             const std::vector<std::vector<int>>& selected, double eta_local) {
  Eigen::VectorXd w = w0;
  for (const auto& round_set : selected) {
    if (round_set.empty()) throw std::invalid_argument("empty selection");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(w.size());
    for (int m : round_set) sum += local_update_gd(pop, m, w, eta_local);
    w = sum / static_cast<double>(round_set.size());
  }
  return w;
}

StepSize theoretical_step_size(Mode mode, const PopulationConstants& constants, int M, int K_bar,
                               int N, int tau, int B, int T) {
  if (!(constants.mu > 0.0) || !(constants.L > 0.0))
    throw std::invalid_argument("constants must have positive mu and L");
  if (M < 1 || K_bar < 1 || N < 1 || T < 1) throw std::invalid_argument("bad step-size inputs");
  const double mu = constants.mu;
  const double kappa = constants.kappa();
  StepSize s;
  double log_term = 0.0;
  switch (mode) {
    case Mode::GD:
      log_term = std::log(static_cast<double>(M) * T * T / (static_cast<double>(K_bar) * K_bar));
      s.eta_theorem = log_term / (mu * N * T);
      s.eta_local = N * s.eta_theorem;
      s.t_lower_bound = 7.0 * kappa * K_bar * log_term;
      break;
    case Mode::SGD:
      if (tau < 1) throw std::invalid_argument("tau must be >= 1");
      log_term = std::log(static_cast<double>(M) * T * T / (static_cast<double>(K_bar) * K_bar));
      s.eta_theorem = log_term / (tau * mu * N * T);
      s.eta_local = N * s.eta_theorem;
      s.t_lower_bound = 10.0 * kappa * K_bar * log_term;
      break;
    case Mode::SSGD:
      if (B < 1) throw std::invalid_argument("B must be >= 1");
      log_term = std::log(static_cast<double>(M) * B * T * T /
                          (static_cast<double>(K_bar) * K_bar));
      s.eta_theorem = log_term / (mu * B * T);
      s.eta_local = s.eta_theorem;  // prescription is already per local step
      s.t_lower_bound = 10.0 * kappa * K_bar * log_term;
      break;
  }
  s.warning = static_cast<double>(T) < s.t_lower_bound;
  return s;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int prec = 1; prec <= 16; ++prec) {
    char shorter[40];
    std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

void write_runlog_csv(const RunLog& log, std::ostream& os) {
  os << "t,k,i,clients,loss_gap,grad_norm,evals\n";
  for (const auto& r : log.records) {
    os << r.t << ',' << r.k << ',' << r.i << ',';
    for (size_t j = 0; j < r.clients.size(); ++j) {
      if (j) os << ';';
      os << r.clients[j];
    }
    os << ',' << format_double(r.loss_gap) << ',' << format_double(r.grad_norm) << ','
       << r.evals << '\n';
  }
}

}  // namespace cycfed
