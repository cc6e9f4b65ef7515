#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/divergence.hpp"
#include "kprox/engine.hpp"
#include "kprox/rng.hpp"
#include "kprox/solvers.hpp"

namespace kprox {

// Interval counts from a serial-sacrifice carcinogenicity study.
// For interval j (1-based): c deaths with tumor, b1 deaths without tumor,
// a2 sacrificed with tumor, b2 sacrificed without tumor; N_alive[j-1] animals
// remain on study after interval j. N0 enters the study.
struct CompetingRisksData {
  int m = 0;
  long long N0 = 0;
  std::vector<long long> N_alive;
  std::vector<long long> c, b1, a2, b2;
};

// Per-interval probabilities, all strictly inside (0, 1):
//   pi_j  P(no tumor at t_j | alive at t_j)
//   p_j   P(survive tumor onset over interval j)
//   q_j   P(survive other causes over interval j)
// pi_0 is identically 1. Monotonicity of the tumor-free survival curve
// imposes pi_j p_j <= pi_{j-1} for j >= 2.
struct CompetingRisksParams {
  vec pi, p, q;
};

// Flat layout used by the engine: (pi_1..pi_m, p_1..p_m, q_1..q_m).
inline vec cr_pack(const CompetingRisksParams& params) {
  vec theta;
  theta.reserve(3 * params.pi.size());
  theta.insert(theta.end(), params.pi.begin(), params.pi.end());
  theta.insert(theta.end(), params.p.begin(), params.p.end());
  theta.insert(theta.end(), params.q.begin(), params.q.end());
  return theta;
}

inline CompetingRisksParams cr_unpack(const vec& theta, int m) {
  if (theta.size() != static_cast<std::size_t>(3 * m))
    throw std::invalid_argument("cr_unpack: parameter vector has wrong length");
  CompetingRisksParams params;
  params.pi.assign(theta.begin(), theta.begin() + m);
  params.p.assign(theta.begin() + m, theta.begin() + 2 * m);
  params.q.assign(theta.begin() + 2 * m, theta.begin() + 3 * m);
  return params;
}

inline std::vector<std::string> cr_param_names(int m) {
  std::vector<std::string> names;
  for (int j = 1; j <= m; ++j) names.push_back("pi_" + std::to_string(j));
  for (int j = 1; j <= m; ++j) names.push_back("p_" + std::to_string(j));
  for (int j = 1; j <= m; ++j) names.push_back("q_" + std::to_string(j));
  return names;
}

inline void cr_validate(const CompetingRisksData& data) {
  if (data.m < 1) throw std::invalid_argument("competing-risks data: m must be >= 1");
  const auto sz = static_cast<std::size_t>(data.m);
  if (data.N_alive.size() != sz || data.c.size() != sz || data.b1.size() != sz ||
      data.a2.size() != sz || data.b2.size() != sz)
    throw std::invalid_argument("competing-risks data: count vectors must have length m");
  if (data.N0 < 0) throw std::invalid_argument("competing-risks data: N0 must be >= 0");
  long long prev = data.N0;
  for (int j = 0; j < data.m; ++j) {
    if (data.c[j] < 0 || data.b1[j] < 0 || data.a2[j] < 0 || data.b2[j] < 0 ||
        data.N_alive[j] < 0)
      throw std::invalid_argument("competing-risks data: counts must be >= 0 (interval " +
                                  std::to_string(j + 1) + ")");
    if (data.N_alive[j] > prev)
      throw std::invalid_argument(
          "competing-risks data: N_alive must be nonincreasing (interval " +
          std::to_string(j + 1) + ")");
    prev = data.N_alive[j];
  }
}

namespace detail {
inline long long cr_n(const CompetingRisksData& data, int i) {  // N_i, i = 0..m
  return i == 0 ? data.N0 : data.N_alive[static_cast<std::size_t>(i - 1)];
}

inline double checked_log(double arg, const char* what, int interval) {
  if (!(arg > 0.0))
    throw boundary_error(std::string("cr_loglik: log argument for ") + what +
                         " is not positive in interval " + std::to_string(interval));
  return std::log(arg);
}
}  // namespace detail

// Observed-data log-likelihood, additive constant dropped, pi_0 = 1:
//   sum_j [ (N_{j-1}-N_j) sum_{k<j} log(p_k q_k) + (a2_j+b2_j) log(p_j q_j)
//           + c_j log((1-p_j) + (1-pi_j p_j)(1-q_j))
//           + b1_j log((1-q_j) pi_{j-1}) + a2_j log(1-pi_j) + b2_j log pi_j ].
// Zero-count terms are skipped, so boundary values only fault when observed.
inline double cr_loglik(const CompetingRisksData& data, const CompetingRisksParams& params) {
  const int m = data.m;
  double ll = 0.0;
  double logpq_prefix = 0.0;  // sum_{k<j} log(p_k q_k), built as j advances
  for (int j = 0; j < m; ++j) {
    const double pi = params.pi[j], p = params.p[j], q = params.q[j];
    const double pi_prev = j == 0 ? 1.0 : params.pi[j - 1];
    const long long coef = detail::cr_n(data, j) - detail::cr_n(data, j + 1);
    if (coef != 0) ll += static_cast<double>(coef) * logpq_prefix;
    const long long sac = data.a2[j] + data.b2[j];
    if (sac != 0)
      ll += static_cast<double>(sac) * detail::checked_log(p * q, "p*q", j + 1);
    if (data.c[j] != 0) {
      const double D = (1.0 - p) + (1.0 - pi * p) * (1.0 - q);
      ll += static_cast<double>(data.c[j]) * detail::checked_log(D, "death cell mass", j + 1);
    }
    if (data.b1[j] != 0)
      ll += static_cast<double>(data.b1[j]) *
            detail::checked_log((1.0 - q) * pi_prev, "(1-q)*pi_prev", j + 1);
    if (data.a2[j] != 0)
      ll += static_cast<double>(data.a2[j]) * detail::checked_log(1.0 - pi, "1-pi", j + 1);
    if (data.b2[j] != 0)
      ll += static_cast<double>(data.b2[j]) * detail::checked_log(pi, "pi", j + 1);
    logpq_prefix += detail::checked_log(p * q, "p*q", j + 1);
  }
  return ll;
}

// Analytic gradient of cr_loglik in the flat layout. The survival prefix
// telescopes: the coefficient of log(p_j q_j) is (N_j - N_m) + a2_j + b2_j.
inline vec cr_loglik_grad(const CompetingRisksData& data, const CompetingRisksParams& params) {
  const int m = data.m;
  const long long Nm = detail::cr_n(data, m);
  vec g(static_cast<std::size_t>(3 * m), 0.0);
  for (int j = 0; j < m; ++j) {
    const double pi = params.pi[j], p = params.p[j], q = params.q[j];
    const double D = (1.0 - p) + (1.0 - pi * p) * (1.0 - q);
    const double c = static_cast<double>(data.c[j]);
    const double pq_coef =
        static_cast<double>(detail::cr_n(data, j + 1) - Nm + data.a2[j] + data.b2[j]);

    double gpi = c * (-p * (1.0 - q)) / D;
    if (data.a2[j] != 0) gpi -= static_cast<double>(data.a2[j]) / (1.0 - pi);
    if (data.b2[j] != 0) gpi += static_cast<double>(data.b2[j]) / pi;
    if (j + 1 < m && data.b1[j + 1] != 0)
      gpi += static_cast<double>(data.b1[j + 1]) / pi;
    g[static_cast<std::size_t>(j)] = gpi;

    g[static_cast<std::size_t>(m + j)] =
        pq_coef / p + c * (-1.0 - pi * (1.0 - q)) / D;

    double gq = pq_coef / q + c * (-(1.0 - pi * p)) / D;
    if (data.b1[j] != 0) gq -= static_cast<double>(data.b1[j]) / (1.0 - q);
    g[static_cast<std::size_t>(2 * m + j)] = gq;
  }
  return g;
}

// Probability that a death with tumor present in interval j (0-based) was
// caused by the tumor, under the reference parameters.
inline double cr_lambda(const CompetingRisksParams& params_bar, int j) {
  if (j < 0 || static_cast<std::size_t>(j) >= params_bar.p.size())
    throw std::invalid_argument("cr_lambda: interval index out of range");
  const double pi = params_bar.pi[j], p = params_bar.p[j], q = params_bar.q[j];
  const double D = (1.0 - p) + (1.0 - pi * p) * (1.0 - q);
  if (!(D > 0.0)) throw boundary_error("cr_lambda: cell mass not positive");
  return (1.0 - p) / D;
}

// Conditional expectation of the complete-data log-likelihood. Identical to
// cr_loglik except that each c_j log D_j is split by the tumor attribution
// probability lambda_j computed at params_bar.
inline double cr_q_function(const CompetingRisksData& data, const CompetingRisksParams& params,
                            const CompetingRisksParams& params_bar) {
  const int m = data.m;
  double total = 0.0;
  double logpq_prefix = 0.0;
  for (int j = 0; j < m; ++j) {
    const double pi = params.pi[j], p = params.p[j], q = params.q[j];
    const double pi_prev = j == 0 ? 1.0 : params.pi[j - 1];
    const long long coef = detail::cr_n(data, j) - detail::cr_n(data, j + 1);
    if (coef != 0) total += static_cast<double>(coef) * logpq_prefix;
    const long long sac = data.a2[j] + data.b2[j];
    if (sac != 0)
      total += static_cast<double>(sac) * detail::checked_log(p * q, "p*q", j + 1);
    if (data.c[j] != 0) {
      const double lambda = cr_lambda(params_bar, j);
      const double cj = static_cast<double>(data.c[j]);
      total += lambda * cj * detail::checked_log(1.0 - p, "1-p", j + 1);
      total += (1.0 - lambda) * cj *
               detail::checked_log((1.0 - pi * p) * (1.0 - q), "(1-pi*p)(1-q)", j + 1);
    }
    if (data.b1[j] != 0)
      total += static_cast<double>(data.b1[j]) *
               detail::checked_log((1.0 - q) * pi_prev, "(1-q)*pi_prev", j + 1);
    if (data.a2[j] != 0)
      total += static_cast<double>(data.a2[j]) * detail::checked_log(1.0 - pi, "1-pi", j + 1);
    if (data.b2[j] != 0)
      total += static_cast<double>(data.b2[j]) * detail::checked_log(pi, "pi", j + 1);
    logpq_prefix += detail::checked_log(p * q, "p*q", j + 1);
  }
  return total;
}

namespace detail {
// d t'_j / d (pi_j, p_j, q_j); t'' = 1 - t' shares the negated gradient.
struct TPrimeGrad {
  double dpi, dp, dq;
};

inline TPrimeGrad tprime_grad(double pi, double p, double q) {
  const double A = 1.0 - p;
  const double D = A + (1.0 - pi * p) * (1.0 - q);
  const double D2 = D * D;
  return {A * p * (1.0 - q) / D2,
          (-D + A * (1.0 + pi * (1.0 - q))) / D2,
          A * (1.0 - pi * p) / D2};
}
}  // namespace detail

// Distance-like function of the tumor attribution statistics. Terms are
// ordered per interval: index 2j is t'_{j+1}, index 2j+1 is t''_{j+1}
// (0-based j), both weighted by c_{j+1}:
//   t'_j  = (1-p_j) / D_j          (death caused by tumor)
//   t''_j = (1-pi_j p_j)(1-q_j) / D_j  (death from other causes, tumor present)
// with D_j their sum, so t'_j + t''_j = 1 identically.
inline KullbackDivergence cr_divergence(const CompetingRisksData& data) {
  cr_validate(data);
  const int m = data.m;
  KullbackDivergence div;
  div.phi = phi_kullback();
  for (int j = 0; j < m; ++j) {
    const double w = static_cast<double>(data.c[j]);
    auto tprime = [m, j](const vec& theta) {
      const double pi = theta[static_cast<std::size_t>(j)];
      const double p = theta[static_cast<std::size_t>(m + j)];
      const double q = theta[static_cast<std::size_t>(2 * m + j)];
      const double A = 1.0 - p;
      return A / (A + (1.0 - pi * p) * (1.0 - q));
    };
    auto grad_entries = [m, j](const vec& theta) {
      const double pi = theta[static_cast<std::size_t>(j)];
      const double p = theta[static_cast<std::size_t>(m + j)];
      const double q = theta[static_cast<std::size_t>(2 * m + j)];
      return detail::tprime_grad(pi, p, q);
    };
    div.terms.push_back(
        {w, tprime, [m, j, grad_entries](const vec& theta) {
           const auto e = grad_entries(theta);
           vec g(theta.size(), 0.0);
           g[static_cast<std::size_t>(j)] = e.dpi;
           g[static_cast<std::size_t>(m + j)] = e.dp;
           g[static_cast<std::size_t>(2 * m + j)] = e.dq;
           return g;
         }});
    div.terms.push_back(
        {w, [tprime](const vec& theta) { return 1.0 - tprime(theta); },
         [m, j, grad_entries](const vec& theta) {
           const auto e = grad_entries(theta);
           vec g(theta.size(), 0.0);
           g[static_cast<std::size_t>(j)] = -e.dpi;
           g[static_cast<std::size_t>(m + j)] = -e.dp;
           g[static_cast<std::size_t>(2 * m + j)] = -e.dq;
           return g;
         }});
  }
  return div;
}

namespace detail {
// Constraint slacks s_j = pi_{j-1} - pi_j p_j for j = 2..m (0-based 1..m-1).
inline vec cr_slacks(const vec& theta, int m) {
  vec s;
  for (int j = 1; j < m; ++j)
    s.push_back(theta[static_cast<std::size_t>(j - 1)] -
                theta[static_cast<std::size_t>(j)] * theta[static_cast<std::size_t>(m + j)]);
  return s;
}
}  // namespace detail

// cr_divergence plus unit-weight barrier terms
//   t'''_j = (pi_{j-1} - pi_j p_j) / sum_{i=2..m} (pi_{i-1} - pi_i p_i)
// appended for j = 2..m at indices 2m..3m-2. The normalized slacks keep every
// iterate strictly feasible for the monotonicity constraint. For m = 1 there
// is no constraint and cr_divergence is returned unchanged.
inline KullbackDivergence cr_divergence_augmented(const CompetingRisksData& data) {
  KullbackDivergence div = cr_divergence(data);
  const int m = data.m;
  if (m < 2) return div;
  for (int j = 1; j < m; ++j) {
    auto stat = [m, j](const vec& theta) {
      const vec s = detail::cr_slacks(theta, m);
      double G = 0.0;
      for (double v : s) G += v;
      if (!(G > 0.0))
        throw boundary_error("cr_divergence_augmented: total slack is not positive");
      return s[static_cast<std::size_t>(j - 1)] / G;
    };
    auto stat_grad = [m, j](const vec& theta) {
      const vec s = detail::cr_slacks(theta, m);
      double G = 0.0;
      for (double v : s) G += v;
      vec dG(theta.size(), 0.0);
      for (int i = 1; i < m; ++i) {
        dG[static_cast<std::size_t>(i - 1)] += 1.0;
        dG[static_cast<std::size_t>(i)] -= theta[static_cast<std::size_t>(m + i)];
        dG[static_cast<std::size_t>(m + i)] -= theta[static_cast<std::size_t>(i)];
      }
      vec ds(theta.size(), 0.0);
      ds[static_cast<std::size_t>(j - 1)] = 1.0;
      ds[static_cast<std::size_t>(j)] = -theta[static_cast<std::size_t>(m + j)];
      ds[static_cast<std::size_t>(m + j)] = -theta[static_cast<std::size_t>(j)];
      const double sj = s[static_cast<std::size_t>(j - 1)];
      vec g(theta.size(), 0.0);
      for (std::size_t d = 0; d < g.size(); ++d)
        g[d] = (ds[d] * G - sj * dG[d]) / (G * G);
      return g;
    };
    div.terms.push_back({1.0, stat, stat_grad});
  }
  return div;
}

// Bundles the model for the engine. The domain is the open cube, intersected
// with strict feasibility of the monotonicity constraint when augmented. The
// guard re-derives every boundary quantity so that a true guard implies all
// statistics and log arguments are positive.
inline ProximalProblem cr_problem(const CompetingRisksData& data, bool augmented) {
  cr_validate(data);
  auto shared = std::make_shared<const CompetingRisksData>(data);
  const int m = data.m;
  const bool use_barrier = augmented && m >= 2;

  ProximalProblem pb;
  pb.dimension = static_cast<std::size_t>(3 * m);
  pb.domain_guard = [m, use_barrier](const vec& theta) {
    if (theta.size() != static_cast<std::size_t>(3 * m)) return false;
    for (int j = 0; j < m; ++j) {
      const double pi = theta[static_cast<std::size_t>(j)];
      const double p = theta[static_cast<std::size_t>(m + j)];
      const double q = theta[static_cast<std::size_t>(2 * m + j)];
      if (!(pi > 0.0 && p > 0.0 && q > 0.0)) return false;
      if (!(1.0 - pi > 0.0 && 1.0 - p > 0.0 && 1.0 - q > 0.0)) return false;
      if (!(1.0 - pi * p > 0.0)) return false;
    }
    if (use_barrier)
      for (double s : detail::cr_slacks(theta, m))
        if (!(s > 0.0)) return false;
    return true;
  };
  pb.loglik = [shared, m](const vec& theta) {
    return cr_loglik(*shared, cr_unpack(theta, m));
  };
  pb.loglik_grad = [shared, m](const vec& theta) {
    return cr_loglik_grad(*shared, cr_unpack(theta, m));
  };
  pb.divergence = use_barrier ? cr_divergence_augmented(data) : cr_divergence(data);
  return pb;
}

inline vec cr_default_start(int m) { return vec(static_cast<std::size_t>(3 * m), 0.5); }

// No closed-form M-step exists for this model.
inline SolverResult maximize_closed_form(const CompetingRisksData&, const vec&) {
  throw unsupported_error("competing-risks model has no closed-form M-step");
}

// Forward-simulates the death/sacrifice process. Within interval j an animal
// alive at t_{j-1} falls in one of three cells with masses proportional to
//   death with tumor present   (1-p_j) + (1-pi_j p_j)(1-q_j)
//   death without tumor        (1-q_j) pi_{j-1}
//   survival                   p_j q_j
// Survivors are thinned by a scheduled sacrifice: a fraction sac_frac at
// interim times, everyone at t_m; sacrificed animals carry a tumor with
// probability 1 - pi_j. Counts are drawn by sequential binomials in a fixed
// order (deaths-with-tumor, deaths-without, sacrifice tumor status), so the
// output is a deterministic function of the seed.
inline CompetingRisksData cr_simulate(int m, long long N, const CompetingRisksParams& true_params,
                                      std::uint64_t seed, double sac_frac = 0.0) {
  if (m < 1) throw std::invalid_argument("cr_simulate: m must be >= 1");
  if (N < 0) throw std::invalid_argument("cr_simulate: N must be >= 0");
  if (!(sac_frac >= 0.0 && sac_frac < 1.0))
    throw std::invalid_argument("cr_simulate: sac_frac must be in [0,1)");
  if (true_params.pi.size() != static_cast<std::size_t>(m) ||
      true_params.p.size() != static_cast<std::size_t>(m) ||
      true_params.q.size() != static_cast<std::size_t>(m))
    throw std::invalid_argument("cr_simulate: parameter vectors must have length m");
  for (int j = 0; j < m; ++j) {
    const double pi = true_params.pi[j], p = true_params.p[j], q = true_params.q[j];
    if (!(pi > 0.0 && pi < 1.0 && p > 0.0 && p < 1.0 && q > 0.0 && q < 1.0))
      throw std::invalid_argument("cr_simulate: true params must lie strictly in (0,1)");
    const double pi_prev = j == 0 ? 1.0 : true_params.pi[j - 1];
    if (pi * p > pi_prev + 1e-12)
      throw std::invalid_argument("cr_simulate: true params violate pi_j p_j <= pi_{j-1}");
  }

  CompetingRisksData data;
  data.m = m;
  data.N0 = N;
  Rng rng(seed);
  long long alive = N;
  for (int j = 0; j < m; ++j) {
    const double pi = true_params.pi[j], p = true_params.p[j], q = true_params.q[j];
    const double pi_prev = j == 0 ? 1.0 : true_params.pi[j - 1];
    const double w_dt = (1.0 - p) + (1.0 - pi * p) * (1.0 - q);
    const double w_dn = (1.0 - q) * pi_prev;
    const double w_s = p * q;
    const double z = w_dt + w_dn + w_s;
    const long long cj = rng.binomial(alive, w_dt / z);
    const long long b1j = rng.binomial(alive - cj, w_dn / (w_dn + w_s));
    const long long surv = alive - cj - b1j;
    const long long sac =
        j == m - 1 ? surv : std::llround(sac_frac * static_cast<double>(surv));
    const long long a2j = rng.binomial(sac, 1.0 - pi);
    data.c.push_back(cj);
    data.b1.push_back(b1j);
    data.a2.push_back(a2j);
    data.b2.push_back(sac - a2j);
    alive = surv - sac;
    data.N_alive.push_back(alive);
  }
  return data;
}

}  // namespace kprox
