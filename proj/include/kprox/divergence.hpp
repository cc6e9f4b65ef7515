#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/phi.hpp"

namespace kprox {

// One summand weight * t(theta) * phi(t(theta_bar) / t(theta)).
//
// statistic must be positive strictly inside the term's domain.
// statistic_grad may be empty when gradients are not needed; operations that
// require it say so.
struct DivergenceTerm {
  double weight = 0.0;
  std::function<double(const vec&)> statistic;
  std::function<vec(const vec&)> statistic_grad;
};

// Distance-like function I(theta, theta_bar) = sum of terms. Immutable after
// construction; evaluation is reentrant.
//
// Terms with weight zero are skipped entirely: they contribute nothing and
// their statistics are not evaluated or positivity-checked.
struct KullbackDivergence {
  std::vector<DivergenceTerm> terms;
  PhiFunction phi;

  // Statistic values at theta, indexed like terms. Entries for zero-weight
  // terms are filled but not positivity-checked.
  vec statistics(const vec& theta) const {
    vec out(terms.size(), 0.0);
    for (std::size_t i = 0; i < terms.size(); ++i) {
      if (terms[i].weight == 0.0) continue;
      const double t = terms[i].statistic(theta);
      if (!(t > statistic_floor))
        throw boundary_error(
            "divergence statistic " + std::to_string(i) + " is not positive",
            static_cast<int>(i));
      out[i] = t;
    }
    return out;
  }

  // I(theta, theta_bar) with the reference statistics precomputed, so a
  // proximal step can reuse them across inner-solver evaluations.
  double eval_given_ref(const vec& theta, const vec& ref_stats) const {
    double total = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const double w = terms[i].weight;
      if (w == 0.0) continue;
      const double t = terms[i].statistic(theta);
      if (!(t > statistic_floor))
        throw boundary_error(
            "divergence statistic " + std::to_string(i) + " is not positive",
            static_cast<int>(i));
      total += w * t * phi.eval(ref_stats[i] / t);
    }
    return total;
  }
};

inline double divergence_eval(const KullbackDivergence& div, const vec& theta,
                              const vec& theta_bar) {
  return div.eval_given_ref(theta, div.statistics(theta_bar));
}

// Gradient of divergence_eval in its first argument. Per term,
//   d/dtheta [w t phi(tbar/t)] = w (phi(r) - r phi'(r)) grad t,  r = tbar/t.
// The same chain rule is used at r exactly 1; phi(1) = 0 keeps it finite.
inline vec divergence_grad1(const KullbackDivergence& div, const vec& theta,
                            const vec& theta_bar) {
  const vec ref = div.statistics(theta_bar);
  vec g;
  for (std::size_t i = 0; i < div.terms.size(); ++i) {
    const double w = div.terms[i].weight;
    if (w == 0.0) continue;
    const double t = div.terms[i].statistic(theta);
    if (!(t > statistic_floor))
      throw boundary_error(
          "divergence statistic " + std::to_string(i) + " is not positive",
          static_cast<int>(i));
    if (!div.terms[i].statistic_grad)
      throw std::invalid_argument("divergence_grad1: term " + std::to_string(i) +
                                  " has no statistic_grad");
    const double r = ref[i] / t;
    const double coef = w * (div.phi.eval(r) - r * div.phi.deriv(r));
    const vec gt = div.terms[i].statistic_grad(theta);
    if (g.empty()) g.assign(gt.size(), 0.0);
    for (std::size_t d = 0; d < gt.size(); ++d) g[d] += coef * gt[d];
  }
  if (g.empty()) g.assign(theta.size(), 0.0);
  return g;
}

}  // namespace kprox
