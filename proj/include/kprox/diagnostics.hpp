#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/engine.hpp"

namespace kprox {

// Central finite differences with h = 1e-6 (1 + |x_i|). Falls back to a
// one-sided difference when the perturbed point leaves the domain (guard
// rejects it or evaluation throws).
inline vec fd_gradient(const std::function<double(const vec&)>& f, const vec& x,
                       const std::function<bool(const vec&)>& guard) {
  const auto eval = [&](const vec& p) -> std::optional<double> {
    if (guard && !guard(p)) return std::nullopt;
    try {
      return f(p);
    } catch (const boundary_error&) {
      return std::nullopt;
    }
  };
  std::optional<double> f0;  // computed lazily, only one-sided stencils need it
  vec g(x.size(), 0.0);
  vec p = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(x[i]));
    p[i] = x[i] + h;
    const std::optional<double> fp = eval(p);
    p[i] = x[i] - h;
    const std::optional<double> fm = eval(p);
    p[i] = x[i];
    if (fp && fm) {
      g[i] = (*fp - *fm) / (2.0 * h);
    } else if (fp || fm) {
      if (!f0) f0 = f(x);
      g[i] = fp ? (*fp - *f0) / h : (*f0 - *fm) / h;
    } else {
      throw std::runtime_error("fd_gradient: no in-domain stencil for coordinate " +
                               std::to_string(i));
    }
  }
  return g;
}

struct MonotonicityViolation {
  int k = 0;           // step from record k to k+1
  double increase = 0.0;
  double bound = 0.0;  // beta_k * divergence_from_prev[k+1]
};

// Certifies the proximal descent inequality along a recorded run:
//   loglik[k+1] - loglik[k] >= beta_k * divergence_from_prev[k+1] - 1e-10.
// An empty result certifies the whole trace.
inline std::vector<MonotonicityViolation> monotonicity_audit(
    const RunTrace& trace, const RelaxationSchedule& schedule) {
  std::vector<MonotonicityViolation> out;
  if (trace.records.size() < 2) return out;
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k) {
    const double beta = schedule_value(schedule, static_cast<int>(k));
    const double increase = trace.records[k + 1].loglik - trace.records[k].loglik;
    const double bound = beta * trace.records[k + 1].divergence_from_prev;
    if (increase < bound - 1e-10)
      out.push_back({static_cast<int>(k), increase, bound});
  }
  return out;
}

// First-order certificate at theta_star. Constraints are the positivity of
// the divergence statistics; a statistic at or below activity_tol is active.
// Multipliers minimize || grad l + sum lambda_i grad t_i ||_2 over a maximal
// linearly independent subfamily of the active gradients, chosen by
// column-pivoted QR (pivots below 1e-8 of the leading pivot are dropped and
// their multipliers reported as zero).
struct KKTReport {
  std::vector<int> active_set;
  std::vector<double> multipliers;  // aligned with active_set
  double residual_norm = 0.0;
  double gradient_norm = 0.0;
  bool multipliers_nonnegative = true;
  bool degenerate = false;  // active gradients all dropped; residual = gradient_norm
};

inline KKTReport kkt_check(const ProximalProblem& problem, const vec& theta_star,
                           double activity_tol = 1e-4) {
  if (!(activity_tol > 0.0))
    throw std::invalid_argument("kkt_check: activity_tol must be positive");
  const vec grad = problem.loglik_grad
                       ? problem.loglik_grad(theta_star)
                       : fd_gradient(problem.loglik, theta_star, problem.domain_guard);
  KKTReport report;
  report.gradient_norm = norm2(grad);

  const auto& terms = problem.divergence.terms;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].weight == 0.0) continue;
    if (terms[i].statistic(theta_star) <= activity_tol)
      report.active_set.push_back(static_cast<int>(i));
  }
  if (report.active_set.empty()) {
    report.residual_norm = report.gradient_norm;
    return report;
  }

  const auto n = static_cast<Eigen::Index>(theta_star.size());
  const auto m = static_cast<Eigen::Index>(report.active_set.size());
  Eigen::MatrixXd A(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& term = terms[static_cast<std::size_t>(report.active_set[j])];
    if (!term.statistic_grad)
      throw std::invalid_argument("kkt_check: active term has no statistic_grad");
    const vec gt = term.statistic_grad(theta_star);
    for (Eigen::Index i = 0; i < n; ++i) A(i, j) = gt[static_cast<std::size_t>(i)];
  }
  Eigen::Map<const Eigen::VectorXd> g(grad.data(), n);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-8);
  const Eigen::Index rank = qr.rank();
  report.multipliers.assign(report.active_set.size(), 0.0);
  if (rank == 0) {
    report.degenerate = true;
    report.multipliers.clear();
    report.residual_norm = report.gradient_norm;
    return report;
  }

  const auto perm = qr.colsPermutation().indices();
  Eigen::MatrixXd Asel(n, rank);
  for (Eigen::Index j = 0; j < rank; ++j) Asel.col(j) = A.col(perm(j));
  const Eigen::VectorXd lambda = Asel.householderQr().solve(-g);
  report.residual_norm = (g + Asel * lambda).norm();
  for (Eigen::Index j = 0; j < rank; ++j) {
    report.multipliers[static_cast<std::size_t>(perm(j))] = lambda(j);
    if (lambda(j) < -1e-12) report.multipliers_nonnegative = false;
  }
  return report;
}

enum class RateClass { sublinear, linear, superlinear, undetermined };

inline const char* to_string(RateClass c) {
  switch (c) {
    case RateClass::sublinear: return "sublinear";
    case RateClass::linear: return "linear";
    case RateClass::superlinear: return "superlinear";
    case RateClass::undetermined: return "undetermined";
  }
  return "unknown";
}

// Trailing contraction ratios || theta^{k+1} - theta* || / || theta^k - theta* ||
// with final_theta standing in for the unknown limit. Records whose distance
// to the proxy is zero (in particular the final iterate itself) carry no
// information and are dropped from the tail. Advisory only.
struct RateEstimate {
  std::vector<double> ratios;
  RateClass classification = RateClass::undetermined;
};

inline RateEstimate rate_estimate(const RunTrace& trace, int window) {
  if (window < 5) throw std::invalid_argument("rate_estimate: window must be >= 5");
  RateEstimate est;
  const auto& recs = trace.records;
  if (recs.size() < static_cast<std::size_t>(window) + 1) return est;

  std::vector<double> dist;
  for (std::size_t k = recs.size() - static_cast<std::size_t>(window) - 1;
       k < recs.size(); ++k)
    dist.push_back(norm2_diff(recs[k].theta, trace.final_theta));
  while (!dist.empty() && dist.back() == 0.0) dist.pop_back();
  for (std::size_t i = 0; i + 1 < dist.size(); ++i) {
    if (dist[i] == 0.0) return est;  // converged mid-window, ratios undefined
    est.ratios.push_back(dist[i + 1] / dist[i]);
  }
  if (est.ratios.size() < 5) return est;

  const auto [mn, mx] = std::minmax_element(est.ratios.begin(), est.ratios.end());
  bool decreasing = true;
  for (std::size_t i = 0; i + 1 < est.ratios.size(); ++i)
    if (est.ratios[i + 1] >= est.ratios[i]) decreasing = false;
  if (decreasing && est.ratios.back() < 0.1)
    est.classification = RateClass::superlinear;
  else if (*mn >= 0.1 && *mx <= 0.95 && *mx - *mn < 0.2)
    est.classification = RateClass::linear;
  else if (*mn >= 0.95)
    est.classification = RateClass::sublinear;
  return est;
}

}  // namespace kprox
