#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/rng.hpp"

namespace kprox {

// Objective for inner maximization. Returns the value, or nullopt when the
// point is outside the objective's domain.
using Objective = std::function<std::optional<double>(const vec&)>;

// Knobs for the simulated-annealing random search. The run is split into 20
// equal stages; stage s uses temperature temp0 * cooling^s and Gaussian
// proposal scale proposal_scale0 * scale_cooling^s.
//
// Defaults are tuned so that the shipped models converge well under the
// iteration budgets used in the test suite; they are deliberately greedy
// (fast cooling, wide-to-fine proposals).
struct AnnealingConfig {
  int budget = 10000;
  double temp0 = 0.7;
  double cooling = 0.52;
  double proposal_scale0 = 0.2;
  double scale_cooling = 0.55;
  std::uint64_t seed = 0;
};

struct SolverResult {
  vec theta;
  double objective = 0.0;
  long evals = 0;
  long accepted = 0;
  bool improved = false;
};

namespace detail {
inline void validate(const AnnealingConfig& cfg) {
  if (cfg.budget < 1) throw std::invalid_argument("annealing: budget must be >= 1");
  if (!(cfg.temp0 > 0.0)) throw std::invalid_argument("annealing: temp0 must be positive");
  if (!(cfg.cooling > 0.0 && cfg.cooling < 1.0))
    throw std::invalid_argument("annealing: cooling must be in (0,1)");
  if (!(cfg.proposal_scale0 > 0.0))
    throw std::invalid_argument("annealing: proposal_scale0 must be positive");
  if (!(cfg.scale_cooling > 0.0 && cfg.scale_cooling <= 1.0))
    throw std::invalid_argument("annealing: scale_cooling must be in (0,1]");
}
}  // namespace detail

// Seeded random search. Best-seen includes theta0, so the result never
// degrades the objective relative to the warm start, for any seed or budget.
//
// Draw order per proposal: one gaussian per coordinate, then, only when the
// proposal is in-domain and worse than the current point, one uniform for the
// Metropolis test. Out-of-domain proposals consume budget but no acceptance
// statistics.
inline SolverResult maximize_annealing(const Objective& objective, const vec& theta0,
                                       const AnnealingConfig& cfg) {
  detail::validate(cfg);
  const std::optional<double> f0 = objective(theta0);
  if (!f0)
    throw std::invalid_argument("maximize_annealing: warm start is out of domain");

  const std::size_t dim = theta0.size();
  const int stage_len = (cfg.budget + 19) / 20;
  double temps[20];
  double scales[20];
  temps[0] = cfg.temp0;
  scales[0] = cfg.proposal_scale0;
  for (int s = 1; s < 20; ++s) {
    temps[s] = temps[s - 1] * cfg.cooling;
    scales[s] = scales[s - 1] * cfg.scale_cooling;
  }

  Rng rng(cfg.seed);
  vec cur = theta0;
  double fcur = *f0;
  vec best = theta0;
  double fbest = *f0;
  long accepted = 0;
  vec prop(dim);

  for (int e = 0; e < cfg.budget; ++e) {
    const int s = e / stage_len;
    const double scale = scales[s];
    for (std::size_t i = 0; i < dim; ++i) prop[i] = cur[i] + scale * rng.gaussian();
    const std::optional<double> fp = objective(prop);
    if (!fp) continue;
    const double d = *fp - fcur;
    bool accept = d >= 0.0;
    if (!accept) accept = rng.uniform01() < std::exp(d / temps[s]);
    if (!accept) continue;
    cur = prop;
    fcur = *fp;
    ++accepted;
    if (fcur > fbest) {
      best = cur;
      fbest = fcur;
    }
  }
  return {std::move(best), fbest, cfg.budget, accepted, fbest > *f0};
}

// Exhaustive lattice search, intended as a test oracle. The lattice spans
// lower + j*step per coordinate and always contains both endpoints; the upper
// endpoint is appended when step does not divide the box edge. Out-of-domain
// lattice points are skipped. Ties break toward the lexicographically
// smallest point, which makes the result independent of enumeration order.
inline SolverResult maximize_grid(const Objective& objective, const vec& lower,
                                  const vec& upper, double step) {
  const std::size_t dim = lower.size();
  if (dim == 0 || dim != upper.size())
    throw std::invalid_argument("maximize_grid: bad box");
  if (dim > 4)
    throw std::invalid_argument("maximize_grid: dimension > 4 refused");
  if (!(step > 0.0)) throw std::invalid_argument("maximize_grid: step must be positive");

  std::vector<vec> axes(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    if (upper[i] < lower[i]) throw std::invalid_argument("maximize_grid: empty box");
    const long n = static_cast<long>(std::floor((upper[i] - lower[i]) / step + 1e-9));
    for (long j = 0; j <= n; ++j) axes[i].push_back(lower[i] + static_cast<double>(j) * step);
    if (axes[i].back() < upper[i] - 1e-12 * std::max(1.0, std::abs(upper[i])))
      axes[i].push_back(upper[i]);
  }

  std::vector<std::size_t> idx(dim, 0);
  vec point(dim);
  SolverResult res;
  bool found = false;
  long evals = 0;
  while (true) {
    for (std::size_t i = 0; i < dim; ++i) point[i] = axes[i][idx[i]];
    const std::optional<double> v = objective(point);
    ++evals;
    if (v) {
      const bool better =
          !found || *v > res.objective ||
          (*v == res.objective && std::lexicographical_compare(point.begin(), point.end(),
                                                               res.theta.begin(),
                                                               res.theta.end()));
      if (better) {
        res.theta = point;
        res.objective = *v;
        found = true;
      }
    }
    std::size_t i = 0;
    for (; i < dim; ++i) {
      if (++idx[i] < axes[i].size()) break;
      idx[i] = 0;
    }
    if (i == dim) break;
  }
  if (!found)
    throw std::runtime_error("maximize_grid: no in-domain lattice point");
  res.evals = evals;
  res.accepted = 0;
  res.improved = true;
  return res;
}

}  // namespace kprox
