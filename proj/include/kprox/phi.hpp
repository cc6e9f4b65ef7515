#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace kprox {

// Convex generator of a distance-like function: phi(1) = 0, phi convex on
// (0, inf). eval and deriv are supplied analytically; deriv removes
// finite-difference noise from KKT residuals.
struct PhiFunction {
  std::function<double(double)> eval;
  std::function<double(double)> deriv;
};

// Default generator phi(tau) = tau log tau, phi'(tau) = log tau + 1.
// Negative on (0, 1); on statistic groups that sum to one with a shared
// weight the group contribution is the Kullback-Leibler divergence of the
// reference statistics from the current ones, hence nonnegative.
inline PhiFunction phi_kullback() {
  return {
      [](double tau) { return tau * std::log(tau); },
      [](double tau) { return std::log(tau) + 1.0; },
  };
}

// Pointwise-nonnegative variant phi(tau) = tau log tau - tau + 1.
// Positive for all tau != 1, so every single term is a divergence on its
// own. On normalized statistic groups the tau - 1 correction telescopes
// away and the summed divergence coincides with phi_kullback's.
inline PhiFunction phi_kullback_nonneg() {
  return {
      [](double tau) { return tau * std::log(tau) - tau + 1.0; },
      [](double tau) { return std::log(tau); },
  };
}

inline double phi_eval(const PhiFunction& phi, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("phi_eval: tau must be positive");
  return phi.eval(tau);
}

inline double phi_deriv(const PhiFunction& phi, double tau) {
  if (!(tau > 0.0)) throw std::domain_error("phi_deriv: tau must be positive");
  return phi.deriv(tau);
}

}  // namespace kprox
