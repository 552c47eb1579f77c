#include "cycfed/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "cycfed/engine.hpp"

namespace cycfed {

CycleDecomposition decompose_cycle(const QuadraticPopulation& pop, const Eigen::VectorXd& w0,
                                   const std::vector<std::vector<int>>& selected,
                                   double eta_sum) {
  const int k_bar = static_cast<int>(selected.size());
  if (k_bar < 1) throw std::invalid_argument("need at least one round of selections");
  const int d = pop.dim();
  if (w0.size() != d) throw std::invalid_argument("w0 dimension mismatch");
  const size_t n = selected.front().size();
  for (const auto& s : selected)
    if (s.empty() || s.size() != n)
      throw std::invalid_argument("selections must be non-empty and equal-sized");

  std::vector<Eigen::VectorXd> qbar(k_bar, Eigen::VectorXd::Zero(d));
  std::vector<Eigen::MatrixXd> sbar(k_bar, Eigen::MatrixXd::Zero(d, d));
  for (int i = 0; i < k_bar; ++i) {
    for (int m : selected[i]) {
      qbar[i] += pop.client_gradient(m, w0);
      sbar[i] += pop.client_hessian(m);
    }
  }

  CycleDecomposition out;
  out.linear_term = Eigen::VectorXd::Zero(d);
  for (const auto& q : qbar) out.linear_term += q;
  out.linear_term *= -eta_sum;

  // rbar = sum_{i=1}^{Kbar-1} (prod_{j=i+2}^{Kbar} (I - eta Sbar_j))
  //        Sbar_{i+1} sum_{j'<=i} qbar_{j'}   (1-based indices)
  Eigen::VectorXd rbar = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd prefix = Eigen::VectorXd::Zero(d);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  for (int i = 1; i <= k_bar - 1; ++i) {
    prefix += qbar[i - 1];
    Eigen::VectorXd term = sbar[i] * prefix;  // Sbar_{i+1}, 0-based index i
    for (int j = i + 2; j <= k_bar; ++j) term = (eye - eta_sum * sbar[j - 1]) * term;
    rbar += term;
  }
  out.noise_term = eta_sum * eta_sum * rbar;
  out.reconstructed_delta = out.linear_term + out.noise_term;

  // Oracle: the engine's one-cycle trajectory under the same selections,
  // with the mean-aggregation local step eta_sum * N.
  const Eigen::VectorXd w_end =
      run_cycle_gd(pop, w0, selected, eta_sum * static_cast<double>(n));
  out.residual_norm = (out.reconstructed_delta - (w_end - w0)).norm();
  return out;
}

std::pair<double, double> wor_variance_check(const std::vector<Eigen::VectorXd>& xs, int N) {
  const int K = static_cast<int>(xs.size());
  if (K < 1 || N < 1 || N > K) throw std::invalid_argument("need 1 <= N <= K");
  // C(K, N) enumeration bound.
  double count = 1.0;
  for (int i = 0; i < N; ++i) count = count * (K - i) / (i + 1);
  if (count > 1e6) throw std::invalid_argument("C(K,N) exceeds the enumeration bound");

  Eigen::VectorXd xbar = Eigen::VectorXd::Zero(xs.front().size());
  for (const auto& x : xs) xbar += x;
  xbar /= static_cast<double>(K);

  double lhs_sum = 0.0;
  long long subsets = 0;
  std::vector<int> pick(N);
  std::iota(pick.begin(), pick.end(), 0);
  for (;;) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(xbar.size());
    for (int idx : pick) mean += xs[idx];
    mean /= static_cast<double>(N);
    lhs_sum += (mean - xbar).squaredNorm();
    ++subsets;
    // next combination
    int j = N - 1;
    while (j >= 0 && pick[j] == K - N + j) --j;
    if (j < 0) break;
    ++pick[j];
    for (int l = j + 1; l < N; ++l) pick[l] = pick[l - 1] + 1;
  }
  const double lhs = lhs_sum / static_cast<double>(subsets);

  double spread = 0.0;
  for (const auto& x : xs) spread += (x - xbar).squaredNorm();
  const double rhs = (K == N || K == 1)
                         ? 0.0
                         : (static_cast<double>(K - N) /
                            (static_cast<double>(N) * K * (K - 1))) *
                               spread;
  return {lhs, rhs};
}

HeterogeneityEstimate estimate_heterogeneity(const Population& pop,
                                             const std::vector<Eigen::VectorXd>& probes) {
  if (probes.size() < 5) throw std::invalid_argument("need at least 5 probe points");
  HeterogeneityEstimate est;
  const int M = pop.num_clients();
  for (const auto& w : probes) {
    const Eigen::VectorXd gf = pop.global_gradient(w);
    std::vector<Eigen::VectorXd> grads(M);
    for (int m = 0; m < M; ++m) {
      grads[m] = pop.client_gradient(m, w);
      est.nu_hat = std::max(est.nu_hat, (grads[m] - gf).norm());
      const int B = pop.num_components(m);
      for (int l = 0; l < B; ++l)
        est.nu_bar_hat =
            std::max(est.nu_bar_hat, (pop.component_gradient(m, l, w) - grads[m]).norm());
    }
    for (const auto& grp : pop.groups()) {
      Eigen::VectorXd gmean = Eigen::VectorXd::Zero(gf.size());
      for (int m : grp) gmean += grads[m];
      gmean /= static_cast<double>(grp.size());
      est.alpha_hat = std::max(est.alpha_hat, (gmean - gf).norm());
      for (int m : grp) est.gamma_hat = std::max(est.gamma_hat, (grads[m] - gmean).norm());
    }
  }
  return est;
}

double finite_population_factor(double group_size, double n) {
  if (n > group_size) throw std::invalid_argument("N exceeds group size");
  if (n == group_size) return 0.0;  // includes the 0/0 case at G = N = 1
  return (group_size - n) / (group_size - 1.0);
}

double cost_gd(double eps, double c_unit, double M, double K_bar, double N, double gamma) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (K_bar < 1 || N < 1 || M < K_bar) throw std::invalid_argument("bad cost inputs");
  const double fp = finite_population_factor(M / K_bar, N);
  return c_unit * K_bar * gamma * gamma / (eps * N) * fp;
}

double cost_sgd(double eps, double c_unit, double M, double K_bar, double N, double gamma,
                double sigma2, int tau) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  return cost_gd(eps, c_unit, M, K_bar, N, gamma) +
         c_unit * sigma2 * K_bar / (eps * N * tau);
}

CostReport cost_ssgd_vs_alternatives(double eps, double c_unit, double M, double K_bar, double N,
                                     int B, double gamma, double alpha, double nu, double nu_bar,
                                     double mu, double kappa) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be > 0");
  if (B < 1) throw std::invalid_argument("B must be >= 1");
  if (!(mu > 0.0) || !(kappa > 0.0)) throw std::invalid_argument("mu, kappa must be > 0");
  if (std::abs(K_bar * N - M) > 1e-9 * std::max(1.0, M))
    throw std::invalid_argument("the refined comparison requires K_bar = M/N");

  const double sqrt_b = std::sqrt(static_cast<double>(B));
  const double pre = c_unit * kappa / std::sqrt(mu * eps);

  CostReport rep;
  rep.c_unit = c_unit;
  rep.epsilon = eps;
  const double gd = pre * (K_bar / std::sqrt(M) + K_bar * alpha);
  const double ssgd = pre * (K_bar / std::sqrt(M * B) + nu + K_bar * alpha + nu_bar / sqrt_b);
  const double local_rr = pre * K_bar * (1.0 / std::sqrt(M * B) + nu + nu_bar / sqrt_b);
  rep.costs.emplace_back("GD@Kbar", gd);
  rep.costs.emplace_back("SSGD@Kbar", ssgd);
  rep.costs.emplace_back("LocalRR", local_rr);

  const bool degenerate = B == 1;
  const double predicate = 1.0 - 1.0 / sqrt_b - nu - nu_bar / sqrt_b;
  rep.verdicts.push_back({degenerate ? "ssgd_vs_gd_degenerate_B1" : "ssgd_cheaper_than_gd",
                          degenerate ? true : predicate > 0.0,
                          "condition 1 - 1/sqrt(B) - nu - nu_bar/sqrt(B) > 0, B > 1"});
  const double denom = gamma + nu_bar / sqrt_b;
  const bool threshold = denom > 0.0 && M > N * (1.0 + alpha / denom);
  rep.verdicts.push_back(
      {"ssgd_beats_local_rr", threshold, "threshold M > N(1 + alpha/(gamma + nu_bar/sqrt(B)))"});
  rep.verdicts.push_back({"ssgd_cost_below_local_rr_numeric", ssgd < local_rr,
                          "direct comparison of the evaluated costs"});
  return rep;
}

RateFit fit_rate(std::vector<std::pair<double, double>> runs) {
  RateFit fit;
  std::sort(runs.begin(), runs.end());
  std::vector<std::pair<double, double>> clean;
  for (const auto& [t, err] : runs) {
    if (err > 0.0)
      clean.emplace_back(t, err);
    else
      fit.excluded_nonpositive = true;
  }
  if (clean.size() < 4) throw std::invalid_argument("need at least 4 positive (T, error) points");
  if (clean.back().first < 8.0 * clean.front().first)
    throw std::invalid_argument("T values must span at least a factor of 8");

  int drop = static_cast<int>(clean.size()) / 4;
  drop = std::min(drop, static_cast<int>(clean.size()) - 4);
  fit.discarded_burn_in = drop;
  fit.window.assign(clean.begin() + drop, clean.end());

  const int n = static_cast<int>(fit.window.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (const auto& [t, err] : fit.window) {
    const double x = std::log(t);
    const double y = std::log(err);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    syy += y * y;
  }
  const double vxx = sxx - sx * sx / n;
  const double vxy = sxy - sx * sy / n;
  const double vyy = syy - sy * sy / n;
  fit.slope = vxy / vxx;
  fit.r2 = vyy > 0.0 ? (vxy * vxy) / (vxx * vyy) : 1.0;
  return fit;
}

void write_cost_report(const CostReport& report, std::ostream& os) {
  os << "cost report (c_unit=" << format_double(report.c_unit)
     << ", eps=" << format_double(report.epsilon) << ")\n";
  for (const auto& [name, value] : report.costs)
    os << "  " << name << " = " << format_double(value) << '\n';
  for (const auto& v : report.verdicts)
    os << "  verdict " << v.comparison << ": " << (v.holds ? "true" : "false") << "  ["
       << v.citation << "]\n";
}

void write_cost_report_csv_row(const CostReport& report, std::ostream& os) {
  os << "name,value\n";
  os << "eps," << format_double(report.epsilon) << '\n';
  os << "c_unit," << format_double(report.c_unit) << '\n';
  for (const auto& [name, value] : report.costs)
    os << name << ',' << format_double(value) << '\n';
  for (const auto& v : report.verdicts) os << v.comparison << ',' << (v.holds ? 1 : 0) << '\n';
}

void write_rate_fit_csv_row(const RateFit& fit, std::ostream& os) {
  os << "slope,r2,points,burn_in_dropped,nonpositive_excluded\n"
     << format_double(fit.slope) << ',' << format_double(fit.r2) << ',' << fit.window.size()
     << ',' << fit.discarded_burn_in << ',' << (fit.excluded_nonpositive ? 1 : 0) << '\n';
}

void write_rate_fit(const RateFit& fit, std::ostream& os) {
  os << "rate fit: slope=" << format_double(fit.slope) << " r2=" << format_double(fit.r2)
     << " burn_in_dropped=" << fit.discarded_burn_in
     << (fit.excluded_nonpositive ? " (nonpositive errors excluded)" : "") << '\n';
  for (const auto& [t, err] : fit.window)
    os << "  T=" << format_double(t) << "  error=" << format_double(err) << '\n';
}

}  // namespace cycfed
