#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kprox/common.hpp"
#include "kprox/divergence.hpp"
#include "kprox/rng.hpp"
#include "kprox/solvers.hpp"

namespace kprox {

// A maximum-likelihood problem prepared for Kullback-proximal iteration.
// domain_guard(theta) true must imply that loglik is finite at theta and
// that every positive-weight divergence statistic is positive there.
struct ProximalProblem {
  std::function<double(const vec&)> loglik;
  std::function<vec(const vec&)> loglik_grad;  // optional, may be empty
  KullbackDivergence divergence;
  std::function<bool(const vec&)> domain_guard;
  std::size_t dimension = 0;
};

// Relaxation sequence beta_k. Constant, or geometric decay clamped at a
// nonnegative floor; both converge, and beta_k >= 0 throughout.
struct RelaxationSchedule {
  enum class Kind { constant, geometric };
  Kind kind = Kind::constant;
  double beta0 = 1.0;
  double decay = 1.0;   // geometric only, in (0, 1]
  double floor = 0.0;   // geometric only
};

inline double schedule_value(const RelaxationSchedule& s, int k) {
  if (k < 0) throw std::invalid_argument("schedule_value: k must be >= 0");
  if (s.beta0 < 0.0) throw std::invalid_argument("schedule_value: beta0 must be >= 0");
  if (s.kind == RelaxationSchedule::Kind::constant) return s.beta0;
  if (!(s.decay > 0.0 && s.decay <= 1.0))
    throw std::invalid_argument("schedule_value: decay must be in (0,1]");
  return std::max(s.beta0 * std::pow(s.decay, k), s.floor);
}

// Row k describes the iterate theta^k. For k >= 1, beta, divergence_from_prev,
// step_norm and the inner-solver counters describe the step that produced it;
// row 0 carries the initial point with step_norm 0 and beta = beta_0.
struct IterationRecord {
  int k = 0;
  double beta = 0.0;
  vec theta;
  double loglik = 0.0;
  double divergence_from_prev = 0.0;
  double step_norm = 0.0;
  long inner_evals = 0;
  long inner_accepted = 0;
};

enum class Termination { max_iters, loglik_stall, step_stall, solver_failure };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::max_iters: return "max_iters";
    case Termination::loglik_stall: return "loglik_stall";
    case Termination::step_stall: return "step_stall";
    case Termination::solver_failure: return "solver_failure";
  }
  return "unknown";
}

struct RunTrace {
  std::vector<IterationRecord> records;
  Termination termination = Termination::max_iters;
  vec final_theta;
};

// loglik_stall fires when three successive increases all fall below
// loglik_tol; the window resists single flat iterations of a stochastic
// inner solver. step_stall fires on one step_norm below step_tol.
// A tolerance of zero disables the corresponding rule.
struct StoppingRule {
  int max_iters = 100;
  double loglik_tol = 0.0;
  double step_tol = 0.0;
};

// Inner maximizer handle. solve(F, warm, k) maximizes F from the warm start;
// k is the iteration index, used by stochastic solvers to derive a per-step
// RNG stream.
struct InnerSolver {
  std::function<SolverResult(const Objective&, const vec&, int)> solve;
};

// Annealing as an inner solver. Iteration k draws from a generator seeded
// with mix_seed(cfg.seed, k), so a whole run is reproducible from cfg.seed
// while steps stay decorrelated.
inline InnerSolver annealing_solver(const AnnealingConfig& cfg) {
  return {[cfg](const Objective& f, const vec& warm, int k) {
    AnnealingConfig step_cfg = cfg;
    step_cfg.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(k));
    return maximize_annealing(f, warm, step_cfg);
  }};
}

// Exact M-step hook for models with a closed-form inner maximizer. The warm
// start stays part of the candidate set: at a fixed point the analytic update
// can lose to the warm start by a few ulps, and returning the warm start then
// keeps the non-degradation contract exact.
inline InnerSolver closed_form_solver(std::function<vec(const vec&)> m_step) {
  return {[m_step = std::move(m_step)](const Objective& f, const vec& warm, int) {
    vec theta = m_step(warm);
    const std::optional<double> v = f(theta);
    const std::optional<double> fw = f(warm);
    if (!fw)
      throw std::runtime_error("closed_form_solver: warm start is out of domain");
    if (!v || *v < *fw) return SolverResult{warm, *fw, 2, 0, false};
    return SolverResult{std::move(theta), *v, 2, 1, *v > *fw};
  }};
}

// Lattice search as an inner solver, for tests with known maximizers.
inline InnerSolver grid_solver(vec lower, vec upper, double step) {
  return {[lower = std::move(lower), upper = std::move(upper), step](
              const Objective& f, const vec&, int) {
    return maximize_grid(f, lower, upper, step);
  }};
}

namespace detail {
// Penalized objective F_beta(., theta_prev) with the reference statistics
// precomputed once per step. Boundary violations inside the guard box are
// mapped to out-of-domain, so the inner solver simply rejects those points.
inline Objective make_step_objective(const ProximalProblem& pb, double beta,
                                     const vec& ref_stats) {
  return [&pb, beta, ref_stats](const vec& x) -> std::optional<double> {
    if (!pb.domain_guard(x)) return std::nullopt;
    try {
      double v = pb.loglik(x);
      if (beta != 0.0) v -= beta * pb.divergence.eval_given_ref(x, ref_stats);
      return v;
    } catch (const boundary_error&) {
      return std::nullopt;
    }
  };
}
}  // namespace detail

struct StepResult {
  vec theta;
  SolverResult inner;
  bool failed = false;
};

// One proximal step: maximize F_beta(theta, theta_prev) from the warm start.
// On any inner-solver failure (no in-domain point, an out-of-domain result,
// or a degraded objective) the previous point is returned with the failure
// flag set; an out-of-domain point is never returned.
inline StepResult proximal_step(const ProximalProblem& problem, const vec& theta_prev,
                                double beta, const InnerSolver& solver, int k = 0) {
  if (beta < 0.0) throw std::invalid_argument("proximal_step: beta must be >= 0");
  if (!problem.domain_guard(theta_prev))
    throw std::invalid_argument("proximal_step: theta_prev is out of domain");

  vec ref_stats;
  if (beta != 0.0) ref_stats = problem.divergence.statistics(theta_prev);
  const Objective F = detail::make_step_objective(problem, beta, ref_stats);
  const std::optional<double> f_warm = F(theta_prev);
  if (!f_warm) return {theta_prev, {}, true};

  SolverResult res;
  try {
    res = solver.solve(F, theta_prev, k);
  } catch (const std::exception&) {
    return {theta_prev, {}, true};
  }
  if (!problem.domain_guard(res.theta) || !(res.objective >= *f_warm))
    return {theta_prev, std::move(res), true};
  return {std::move(res.theta), std::move(res), false};
}

// Kullback-proximal iteration theta^{k+1} = argmax l(theta) - beta_k I(theta, theta^k).
//
// The inner solver's non-degradation contract makes the log-likelihood
// sequence monotone up to floating-point noise:
//   l(theta^{k+1}) - l(theta^k) >= beta_k I(theta^{k+1}, theta^k) >= 0.
// A violation beyond 1e-10 aborts the run via monotonicity_error.
inline RunTrace run(const ProximalProblem& problem, const RelaxationSchedule& schedule,
                    const InnerSolver& solver, const vec& theta0, const StoppingRule& stop) {
  if (stop.max_iters < 1) throw std::invalid_argument("run: max_iters must be >= 1");
  if (!problem.domain_guard(theta0))
    throw std::invalid_argument("run: initial point is out of domain");

  RunTrace trace;
  double ll = problem.loglik(theta0);
  trace.records.push_back({0, schedule_value(schedule, 0), theta0, ll, 0.0, 0.0, 0, 0});
  trace.termination = Termination::max_iters;

  int stall_streak = 0;
  for (int k = 0; k < stop.max_iters; ++k) {
    const double beta = schedule_value(schedule, k);
    const vec& prev = trace.records.back().theta;
    StepResult sr = proximal_step(problem, prev, beta, solver, k);
    if (sr.failed) {
      trace.termination = Termination::solver_failure;
      break;
    }
    const double ll_next = problem.loglik(sr.theta);
    const double div = divergence_eval(problem.divergence, sr.theta, prev);
    const double increase = ll_next - ll;
    const double bound = beta * div;
    if (increase < bound - 1e-10)
      throw monotonicity_error(
          "monotonicity violated at iteration " + std::to_string(k) + ": increase " +
              std::to_string(increase) + " < beta*divergence " + std::to_string(bound),
          k, increase, bound);
    const double step_norm = norm2_diff(sr.theta, prev);
    trace.records.push_back({k + 1, beta, std::move(sr.theta), ll_next, div, step_norm,
                             sr.inner.evals, sr.inner.accepted});

    if (stop.loglik_tol > 0.0) {
      stall_streak = increase < stop.loglik_tol ? stall_streak + 1 : 0;
      if (stall_streak >= 3) {
        trace.termination = Termination::loglik_stall;
        ll = ll_next;
        break;
      }
    }
    if (stop.step_tol > 0.0 && step_norm < stop.step_tol) {
      trace.termination = Termination::step_stall;
      ll = ll_next;
      break;
    }
    ll = ll_next;
  }
  trace.final_theta = trace.records.back().theta;
  return trace;
}

}  // namespace kprox
