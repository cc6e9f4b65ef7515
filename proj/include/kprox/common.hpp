#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace kprox {

using vec = std::vector<double>;

// Statistics at or below this value are treated as boundary violations rather
// than evaluated; keeps the inner solver's rejection logic deterministic.
inline constexpr double statistic_floor = 1e-300;

// A divergence statistic or likelihood term left its open domain.
// term_index is the offending divergence term, or -1 when the violation
// came from a likelihood term.
class boundary_error : public std::runtime_error {
 public:
  boundary_error(std::string msg, int term_index = -1)
      : std::runtime_error(std::move(msg)), term_index_(term_index) {}
  int term_index() const noexcept { return term_index_; }

 private:
  int term_index_;
};

// The proximal iteration produced a step that decreases the penalized
// objective beyond the numerical slack. This is the algorithm's defining
// certificate, so the run is aborted rather than continued.
class monotonicity_error : public std::runtime_error {
 public:
  monotonicity_error(std::string msg, int k, double increase, double bound)
      : std::runtime_error(std::move(msg)), k_(k), increase_(increase), bound_(bound) {}
  int iteration() const noexcept { return k_; }
  double increase() const noexcept { return increase_; }
  double bound() const noexcept { return bound_; }

 private:
  int k_;
  double increase_;
  double bound_;
};

// Requested operation is not defined for the given model (e.g. a closed-form
// maximizer for a model without one).
class unsupported_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double norm2(const vec& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s);
}

inline double norm2_diff(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

inline double sup_diff(const vec& a, const vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace kprox
