#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/divergence.hpp"
#include "kprox/engine.hpp"
#include "kprox/solvers.hpp"

namespace kprox {

// One-dimensional Gaussian mixture with a shared fixed variance. Only the
// mixing weights and component means are estimated; fixing the variance keeps
// the M-step in closed form.
struct GaussianMixtureModel {
  std::vector<double> data;
  int n_components = 1;
  double known_variance = 1.0;
};

inline void gmm_validate(const GaussianMixtureModel& model) {
  if (model.data.empty())
    throw std::invalid_argument("gaussian mixture: data must be nonempty");
  if (model.n_components < 1)
    throw std::invalid_argument("gaussian mixture: n_components must be >= 1");
  if (!(model.known_variance > 0.0))
    throw std::invalid_argument("gaussian mixture: known_variance must be > 0");
}

// Flat layout: (w_1..w_{K-1}, mu_1..mu_K). The last weight is implied,
// w_K = 1 - sum of the others, so the simplex constraint is built in and the
// domain stays open.
inline std::size_t gmm_dimension(const GaussianMixtureModel& model) {
  return static_cast<std::size_t>(2 * model.n_components - 1);
}

inline std::vector<std::string> gmm_param_names(int n_components) {
  std::vector<std::string> names;
  for (int c = 1; c < n_components; ++c) names.push_back("w_" + std::to_string(c));
  for (int c = 1; c <= n_components; ++c) names.push_back("mu_" + std::to_string(c));
  return names;
}

namespace detail {
inline double gmm_wsum(const vec& theta, int K) {
  double s = 0.0;
  for (int d = 0; d + 1 < K; ++d) s += theta[static_cast<std::size_t>(d)];
  return s;
}

inline double gmm_weight(const vec& theta, int K, int d, double wsum) {
  return d + 1 < K ? theta[static_cast<std::size_t>(d)] : 1.0 - wsum;
}

inline double gmm_mean(const vec& theta, int K, int d) {
  return theta[static_cast<std::size_t>(K - 1 + d)];
}

// log(w_d) - (x - mu_d)^2 / (2 var): the log joint cell up to the shared
// Gaussian normalizer. Every responsibility and likelihood evaluation routes
// through this expression so the variants agree bitwise.
inline double gmm_log_cell(double x, const vec& theta, int K, double var, int d, double wsum) {
  const double z = x - gmm_mean(theta, K, d);
  return std::log(gmm_weight(theta, K, d, wsum)) - z * z / (2.0 * var);
}

// Single responsibility r_ic without allocation; recomputes the K cells in a
// second pass instead of buffering them.
inline double gmm_resp_one(double x, const vec& theta, int K, double var, int c) {
  const double wsum = gmm_wsum(theta, K);
  double amax = -std::numeric_limits<double>::infinity();
  for (int d = 0; d < K; ++d)
    amax = std::max(amax, gmm_log_cell(x, theta, K, var, d, wsum));
  double denom = 0.0, numer = 0.0;
  for (int d = 0; d < K; ++d) {
    const double e = std::exp(gmm_log_cell(x, theta, K, var, d, wsum) - amax);
    denom += e;
    if (d == c) numer = e;
  }
  return numer / denom;
}

// Full responsibility matrix, row-major i*K + c, same max shift per row.
inline std::vector<double> gmm_resp(const GaussianMixtureModel& model, const vec& theta) {
  const int K = model.n_components;
  const double var = model.known_variance;
  const double wsum = gmm_wsum(theta, K);
  std::vector<double> r(model.data.size() * static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < model.data.size(); ++i) {
    const double x = model.data[i];
    double amax = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < K; ++d)
      amax = std::max(amax, gmm_log_cell(x, theta, K, var, d, wsum));
    double denom = 0.0;
    for (int d = 0; d < K; ++d) {
      const double e = std::exp(gmm_log_cell(x, theta, K, var, d, wsum) - amax);
      r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(d)] = e;
      denom += e;
    }
    for (int d = 0; d < K; ++d)
      r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(d)] /= denom;
  }
  return r;
}
}  // namespace detail

inline double gmm_loglik(const GaussianMixtureModel& model, const vec& theta) {
  const int K = model.n_components;
  const double var = model.known_variance;
  const double wsum = detail::gmm_wsum(theta, K);
  const double log_norm = 0.5 * std::log(2.0 * M_PI * var);
  double ll = 0.0;
  for (double x : model.data) {
    double amax = -std::numeric_limits<double>::infinity();
    for (int d = 0; d < K; ++d)
      amax = std::max(amax, detail::gmm_log_cell(x, theta, K, var, d, wsum));
    double s = 0.0;
    for (int d = 0; d < K; ++d)
      s += std::exp(detail::gmm_log_cell(x, theta, K, var, d, wsum) - amax);
    ll += amax + std::log(s) - log_norm;
  }
  return ll;
}

// Gradient in the reduced layout. The weight components differentiate through
// w_K = 1 - sum, giving d l / d w_c = sum_i (r_ic / w_c - r_iK / w_K).
inline vec gmm_loglik_grad(const GaussianMixtureModel& model, const vec& theta) {
  const int K = model.n_components;
  const std::size_t n = model.data.size();
  const double wsum = detail::gmm_wsum(theta, K);
  const std::vector<double> r = detail::gmm_resp(model, theta);
  vec g(gmm_dimension(model), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double riK = r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(K - 1)];
    for (int c = 0; c + 1 < K; ++c)
      g[static_cast<std::size_t>(c)] +=
          r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(c)] /
              detail::gmm_weight(theta, K, c, wsum) -
          riK / detail::gmm_weight(theta, K, K - 1, wsum);
    for (int c = 0; c < K; ++c)
      g[static_cast<std::size_t>(K - 1 + c)] +=
          r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(c)] *
          (model.data[i] - detail::gmm_mean(theta, K, c)) / model.known_variance;
  }
  return g;
}

// Textbook EM update: responsibilities at params, then weights = average
// responsibility and means = responsibility-weighted sample means. A
// component with zero total responsibility keeps its mean.
inline vec gmm_em_step(const GaussianMixtureModel& model, const vec& params) {
  gmm_validate(model);
  const int K = model.n_components;
  const std::size_t n = model.data.size();
  const std::vector<double> r = detail::gmm_resp(model, params);
  vec next(gmm_dimension(model), 0.0);
  for (int c = 0; c < K; ++c) {
    double s = 0.0, sx = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ric = r[i * static_cast<std::size_t>(K) + static_cast<std::size_t>(c)];
      s += ric;
      sx += ric * model.data[i];
    }
    if (c + 1 < K) next[static_cast<std::size_t>(c)] = s / static_cast<double>(n);
    next[static_cast<std::size_t>(K - 1 + c)] =
        s > 0.0 ? sx / s : detail::gmm_mean(params, K, c);
  }
  return next;
}

// Divergence terms indexed by observation x component (row-major i*K + c),
// unit weights, statistics = responsibilities.
inline KullbackDivergence gmm_divergence(const GaussianMixtureModel& model) {
  gmm_validate(model);
  auto shared = std::make_shared<const GaussianMixtureModel>(model);
  const int K = model.n_components;
  KullbackDivergence div;
  div.phi = phi_kullback();
  for (std::size_t i = 0; i < model.data.size(); ++i) {
    for (int c = 0; c < K; ++c) {
      const double x = model.data[i];
      auto stat = [x, c, K, shared](const vec& theta) {
        return detail::gmm_resp_one(x, theta, K, shared->known_variance, c);
      };
      auto stat_grad = [x, c, K, shared](const vec& theta) {
        const double var = shared->known_variance;
        const double wsum = detail::gmm_wsum(theta, K);
        std::vector<double> row(static_cast<std::size_t>(K));
        double amax = -std::numeric_limits<double>::infinity();
        for (int d = 0; d < K; ++d)
          amax = std::max(amax, detail::gmm_log_cell(x, theta, K, var, d, wsum));
        double denom = 0.0;
        for (int d = 0; d < K; ++d) {
          row[static_cast<std::size_t>(d)] =
              std::exp(detail::gmm_log_cell(x, theta, K, var, d, wsum) - amax);
          denom += row[static_cast<std::size_t>(d)];
        }
        for (int d = 0; d < K; ++d) row[static_cast<std::size_t>(d)] /= denom;

        const double ric = row[static_cast<std::size_t>(c)];
        const double riK = row[static_cast<std::size_t>(K - 1)];
        vec g(theta.size(), 0.0);
        for (int d = 0; d + 1 < K; ++d) {
          double v = -row[static_cast<std::size_t>(d)] / detail::gmm_weight(theta, K, d, wsum) +
                     riK / detail::gmm_weight(theta, K, K - 1, wsum);
          if (d == c) v += 1.0 / detail::gmm_weight(theta, K, c, wsum);
          if (c == K - 1) v -= 1.0 / detail::gmm_weight(theta, K, K - 1, wsum);
          g[static_cast<std::size_t>(d)] = ric * v;
        }
        for (int d = 0; d < K; ++d) {
          const double zd = (x - detail::gmm_mean(theta, K, d)) / var;
          g[static_cast<std::size_t>(K - 1 + d)] =
              ric * ((d == c ? 1.0 : 0.0) - row[static_cast<std::size_t>(d)]) * zd;
        }
        return g;
      };
      div.terms.push_back({1.0, stat, stat_grad});
    }
  }
  return div;
}

// Domain: all weights strictly positive (the implied last one included) and
// means inside a wide box around the data, which keeps iterates bounded.
inline ProximalProblem gmm_problem(const GaussianMixtureModel& model) {
  gmm_validate(model);
  auto shared = std::make_shared<const GaussianMixtureModel>(model);
  const int K = model.n_components;
  const auto [lo_it, hi_it] = std::minmax_element(model.data.begin(), model.data.end());
  const double spread = std::max(*hi_it - *lo_it, 1.0);
  const double lo = *lo_it - 5.0 * spread;
  const double hi = *hi_it + 5.0 * spread;

  ProximalProblem pb;
  pb.dimension = gmm_dimension(model);
  pb.domain_guard = [K, lo, hi](const vec& theta) {
    if (theta.size() != static_cast<std::size_t>(2 * K - 1)) return false;
    double sum = 0.0;
    for (int c = 0; c + 1 < K; ++c) {
      if (!(theta[static_cast<std::size_t>(c)] > 0.0)) return false;
      sum += theta[static_cast<std::size_t>(c)];
    }
    if (!(1.0 - sum > 0.0)) return false;
    for (int c = 0; c < K; ++c) {
      const double mu = theta[static_cast<std::size_t>(K - 1 + c)];
      if (!(mu >= lo && mu <= hi)) return false;
    }
    return true;
  };
  pb.loglik = [shared](const vec& theta) { return gmm_loglik(*shared, theta); };
  pb.loglik_grad = [shared](const vec& theta) { return gmm_loglik_grad(*shared, theta); };
  pb.divergence = gmm_divergence(model);
  return pb;
}

// Uniform weights; means spread over the data quantiles so distinct
// components start distinct without any clustering pass.
inline vec gmm_default_start(const GaussianMixtureModel& model) {
  gmm_validate(model);
  const int K = model.n_components;
  std::vector<double> sorted = model.data;
  std::sort(sorted.begin(), sorted.end());
  vec theta(gmm_dimension(model), 0.0);
  for (int c = 0; c + 1 < K; ++c)
    theta[static_cast<std::size_t>(c)] = 1.0 / static_cast<double>(K);
  for (int c = 0; c < K; ++c) {
    const double pos = (static_cast<double>(c) + 0.5) / static_cast<double>(K) *
                       static_cast<double>(sorted.size() - 1);
    const auto i0 = static_cast<std::size_t>(pos);
    const std::size_t i1 = std::min(i0 + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(i0);
    theta[static_cast<std::size_t>(K - 1 + c)] =
        sorted[i0] + frac * (sorted[i1] - sorted[i0]);
  }
  return theta;
}

// Exact maximizer of the beta = 1 proximal objective F_1(., theta_prev); one
// EM update coincides with it. The reported objective is F_1 at the returned
// point, so improvement over the warm start is the EM inequality. As in the
// generic closed-form hook, the warm start wins when float noise makes the
// analytic update lose to it by ulps near a fixed point.
inline SolverResult maximize_closed_form(const GaussianMixtureModel& model,
                                         const vec& theta_prev) {
  gmm_validate(model);
  const KullbackDivergence div = gmm_divergence(model);
  const vec ref_stats = div.statistics(theta_prev);
  const vec theta_next = gmm_em_step(model, theta_prev);
  const double f_prev = gmm_loglik(model, theta_prev);  // F_1 at the warm start
  const double f_next =
      gmm_loglik(model, theta_next) - div.eval_given_ref(theta_next, ref_stats);
  SolverResult res;
  res.evals = 2;
  if (f_next < f_prev) {
    res.theta = theta_prev;
    res.objective = f_prev;
    res.accepted = 0;
    res.improved = false;
    return res;
  }
  res.theta = theta_next;
  res.objective = f_next;
  res.accepted = 1;
  res.improved = f_next > f_prev;
  return res;
}

}  // namespace kprox
