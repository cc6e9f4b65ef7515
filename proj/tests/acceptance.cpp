// Acceptance checks for the proximal-point solver. Each criterion prints one
// PASS/FAIL line; the process exits nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "kprox/kprox.hpp"

using namespace kprox;
namespace fs = std::filesystem;

namespace {

bool all_ok = true;

void report(int n, bool ok, const std::string& detail) {
  std::printf("criterion %d: %s (%s)\n", n, ok ? "PASS" : "FAIL", detail.c_str());
  if (!ok) all_ok = false;
}

// Synthetic five-interval study, 200 animals, interim sacrifices.
CompetingRisksData study_data() {
  return {5,
          200,
          {143, 105, 79, 55, 0},
          {33, 26, 14, 15, 13},
          {20, 9, 10, 7, 3},
          {0, 0, 0, 1, 14},
          {4, 3, 2, 1, 25}};
}

GaussianMixtureModel mixture_model() {
  Rng rng(123);
  std::vector<double> xs;
  for (int i = 0; i < 50; ++i) {
    const bool second = rng.uniform01() < 0.6;
    xs.push_back((second ? 2.0 : -2.0) + rng.gaussian());
  }
  return {xs, 2, 1.0};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Random point satisfying the open cube and the ordering constraint with a
// strict margin, so finite-difference stencils stay feasible.
vec feasible_point(Rng& rng, int m) {
  vec theta(static_cast<std::size_t>(3 * m));
  double pi_prev = 1.0;
  for (int j = 0; j < m; ++j) {
    const double pi = (j == 0 ? 0.5 + 0.45 * rng.uniform01()
                              : pi_prev * (0.3 + 0.6 * rng.uniform01()));
    theta[static_cast<std::size_t>(j)] = pi;
    theta[static_cast<std::size_t>(m + j)] = 0.1 + 0.8 * rng.uniform01();
    theta[static_cast<std::size_t>(2 * m + j)] = 0.1 + 0.8 * rng.uniform01();
    pi_prev = pi;
  }
  return theta;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

}  // namespace

int main() {
  // ---- Shared sweep: 3 relaxation values x 10 seeds on the study data ----
  const CompetingRisksData data = study_data();
  const ProximalProblem cr_pb = cr_problem(data, true);
  const vec cr_start = cr_default_start(data.m);
  const std::vector<double> betas = {100.0, 1.0, 0.01};

  const auto sweep_t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<RunTrace>> sweep(betas.size());
  std::vector<RelaxationSchedule> sweep_sch(betas.size());
  for (std::size_t b = 0; b < betas.size(); ++b) {
    sweep_sch[b].beta0 = betas[b];
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      AnnealingConfig cfg;
      cfg.seed = seed;
      StoppingRule stop;
      stop.max_iters = 100;
      sweep[b].push_back(
          run(cr_pb, sweep_sch[b], annealing_solver(cfg), cr_start, stop));
    }
  }
  const double sweep_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - sweep_t0).count();

  // Criterion 1: the descent certificate holds on every recorded run.
  {
    std::size_t violations = 0;
    for (std::size_t b = 0; b < betas.size(); ++b)
      for (const RunTrace& tr : sweep[b])
        violations += monotonicity_audit(tr, sweep_sch[b]).size();
    report(1, violations == 0 && sweep_secs < 120.0,
           "30 runs, " + std::to_string(violations) + " violations, " + fmt(sweep_secs) +
               "s");
  }

  // ---- Mixture runs shared by criteria 2 and 3 ----
  const GaussianMixtureModel model = mixture_model();
  const ProximalProblem gmm_pb = gmm_problem(model);
  const vec gmm_start = gmm_default_start(model);

  const auto mix_t0 = std::chrono::steady_clock::now();
  std::vector<vec> kpp_finals;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    AnnealingConfig cfg;
    cfg.budget = 20000;
    cfg.seed = seed;
    StoppingRule stop;
    stop.max_iters = 10;
    kpp_finals.push_back(run(gmm_pb, {}, annealing_solver(cfg), gmm_start, stop).final_theta);
  }
  vec em_final = gmm_start;
  for (int k = 0; k < 10; ++k) em_final = gmm_em_step(model, em_final);
  const double mix_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - mix_t0).count();

  // Criterion 2: unit relaxation with a stochastic inner solver tracks the
  // analytic iteration.
  {
    int close = 0;
    double worst = 0.0;
    for (const vec& theta : kpp_finals) {
      const double d = sup_diff(theta, em_final);
      worst = std::max(worst, d);
      if (d <= 1e-3) ++close;
    }
    report(2, close >= 9 && mix_secs < 60.0,
           std::to_string(close) + "/10 within 1e-3, worst " + fmt(worst) + ", " +
               fmt(mix_secs) + "s");
  }

  // Criterion 3: interior limits are near-stationary on the scale of the
  // likelihood.
  {
    double worst = 0.0;
    for (const vec& theta : kpp_finals) {
      const double scaled = norm2(gmm_pb.loglik_grad(theta)) /
                            (1.0 + std::abs(gmm_pb.loglik(theta)));
      worst = std::max(worst, scaled);
    }
    report(3, worst <= 1e-2, "worst scaled gradient " + fmt(worst));
  }

  // Criterion 4: a boundary-attracted fit yields a first-order certificate
  // that plain stationarity misses.
  {
    const CompetingRisksData boundary_data{1, 100, {0}, {2}, {0}, {38}, {60}};
    const ProximalProblem pb = cr_problem(boundary_data, true);
    AnnealingConfig cfg;
    cfg.budget = 20000;
    cfg.temp0 = 0.1;
    cfg.cooling = 0.45;
    cfg.proposal_scale0 = 0.2;
    cfg.scale_cooling = 0.5;
    cfg.seed = 1;
    StoppingRule stop;
    stop.max_iters = 300;
    const RunTrace tr = run(pb, {}, annealing_solver(cfg), cr_default_start(1), stop);
    const KKTReport rep = kkt_check(pb, tr.final_theta);
    const bool ok = !rep.active_set.empty() && rep.residual_norm <= 1e-2 &&
                    rep.gradient_norm >= 10.0 * rep.residual_norm;
    report(4, ok,
           "residual " + fmt(rep.residual_norm) + ", gradient " + fmt(rep.gradient_norm) +
               ", active " + std::to_string(rep.active_set.size()));
  }

  // Criterion 5: small and unit relaxation converge by iteration 100; a large
  // value does not for most seeds.
  {
    bool small_ok = true;
    double worst_small = 0.0;
    for (std::size_t b = 1; b < 3; ++b)  // beta = 1 and 0.01
      for (const RunTrace& tr : sweep[b]) {
        const double inc = tr.records[100].loglik - tr.records[99].loglik;
        worst_small = std::max(worst_small, inc);
        if (!(inc < 1e-5)) small_ok = false;
      }
    int large_fail = 0;
    for (const RunTrace& tr : sweep[0]) {  // beta = 100
      const double inc = tr.records[100].loglik - tr.records[99].loglik;
      if (!(inc < 1e-5)) ++large_fail;
    }
    report(5, small_ok && large_fail >= 6,
           "small-beta worst increase " + fmt(worst_small) + ", beta=100 unconverged " +
               std::to_string(large_fail) + "/10");
  }

  // Criterion 6: the smallest relaxation value leads at iteration 50.
  {
    std::vector<double> med(3);
    for (std::size_t b = 0; b < 3; ++b) {
      std::vector<double> at50;
      for (const RunTrace& tr : sweep[b]) at50.push_back(tr.records[50].loglik);
      med[b] = median(at50);
    }
    const bool ok = med[2] > med[1] && med[2] > med[0];
    report(6, ok,
           "medians at 50: beta=100 " + fmt(med[0]) + ", beta=1 " + fmt(med[1]) +
               ", beta=0.01 " + fmt(med[2]));
  }

  // Criterion 7: divergence axioms on 1000 random feasible points.
  {
    const KullbackDivergence div = cr_divergence_augmented(data);
    const int m = data.m;
    Rng rng(2024);
    bool ok = true;
    std::string why = "all axioms hold";
    vec prev = feasible_point(rng, m);
    for (int t = 0; t < 1000 && ok; ++t) {
      const vec theta = feasible_point(rng, m);

      if (divergence_eval(div, theta, theta) != 0.0) {
        ok = false;
        why = "self-divergence not zero";
        break;
      }
      const double cross = divergence_eval(div, theta, prev);
      if (!(cross >= -1e-12)) {
        ok = false;
        why = "negative divergence " + fmt(cross);
        break;
      }

      const vec s = div.statistics(theta);
      for (int j = 0; j < m; ++j)
        if (std::abs(s[static_cast<std::size_t>(2 * j)] +
                     s[static_cast<std::size_t>(2 * j + 1)] - 1.0) > 1e-12) {
          ok = false;
          why = "attribution pair does not sum to one";
        }
      double slack_sum = 0.0;
      for (std::size_t i = static_cast<std::size_t>(2 * m); i < s.size(); ++i)
        slack_sum += s[i];
      if (std::abs(slack_sum - 1.0) > 1e-12) {
        ok = false;
        why = "slack profile does not sum to one";
      }

      const vec g = divergence_grad1(div, theta, prev);
      const vec fd = fd_gradient(
          [&](const vec& x) { return divergence_eval(div, x, prev); }, theta, nullptr);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (std::abs(g[i] - fd[i]) > 1e-6 * std::max(1.0, std::abs(g[i]))) {
          ok = false;
          why = "gradient mismatch " + fmt(std::abs(g[i] - fd[i])) + " at coordinate " +
                std::to_string(i);
        }
      prev = theta;
    }
    report(7, ok, why);
  }

  // Criterion 8: the fitted point's likelihood is grid-optimal for its own
  // proximal objective.
  {
    const CompetingRisksData small{1, 60, {0}, {18}, {12}, {12}, {18}};
    const ProximalProblem pb = cr_problem(small, true);
    AnnealingConfig cfg;
    cfg.seed = 5;
    StoppingRule stop;
    stop.max_iters = 200;
    const RunTrace tr = run(pb, {}, annealing_solver(cfg), cr_default_start(1), stop);
    const vec& hat = tr.final_theta;

    const vec ref = pb.divergence.statistics(hat);
    const Objective F = [&](const vec& x) -> std::optional<double> {
      if (!pb.domain_guard(x)) return std::nullopt;
      try {
        return pb.loglik(x) - pb.divergence.eval_given_ref(x, ref);
      } catch (const boundary_error&) {
        return std::nullopt;
      }
    };
    const SolverResult oracle =
        maximize_grid(F, {0.005, 0.005, 0.005}, {0.995, 0.995, 0.995}, 0.01);
    const double attained = pb.loglik(hat);
    report(8, attained >= oracle.objective - 1e-2,
           "attained " + fmt(attained) + " vs grid " + fmt(oracle.objective));
  }

  // Criterion 9: every iterate of every augmented run is strictly feasible.
  {
    std::size_t bad = 0;
    for (const auto& runs : sweep)
      for (const RunTrace& tr : runs)
        for (const IterationRecord& rec : tr.records)
          for (int j = 1; j < data.m; ++j)
            if (!(rec.theta[static_cast<std::size_t>(j)] *
                      rec.theta[static_cast<std::size_t>(data.m + j)] <
                  rec.theta[static_cast<std::size_t>(j - 1)]))
              ++bad;
    report(9, bad == 0, std::to_string(bad) + " ordering violations across 30 runs");
  }

  // Criterion 10: refitting with the same seed reproduces the trace file
  // byte for byte.
  {
    ExperimentConfig cfg;
    cfg.model = ModelKind::competing_risks;
    cfg.has_simulate = true;
    cfg.simulate.m = 5;
    cfg.simulate.N = 200;
    cfg.simulate.pi = {0.92, 0.85, 0.78, 0.70, 0.62};
    cfg.simulate.p = {0.85, 0.85, 0.85, 0.85, 0.85};
    cfg.simulate.q = {0.90, 0.90, 0.90, 0.90, 0.90};
    cfg.simulate.sac_frac = 0.03;
    cfg.seed = 2;
    cfg.stop.max_iters = 30;

    const fs::path base = fs::temp_directory_path() / "kprox_acceptance";
    fs::remove_all(base);
    const int rc1 = run_fit(cfg, {}, {}, (base / "a").string());
    const int rc2 = run_fit(cfg, {}, {}, (base / "b").string());
    const auto slurp = [](const fs::path& p) {
      std::ifstream in(p);
      std::ostringstream buf;
      buf << in.rdbuf();
      return buf.str();
    };
    const std::string ta = slurp(base / "a" / "trace.csv");
    const std::string tb = slurp(base / "b" / "trace.csv");
    const bool ok = rc1 == 0 && rc2 == 0 && !ta.empty() && ta == tb;
    report(10, ok, ok ? "traces byte-identical" : "traces differ or fit failed");
    fs::remove_all(base);
  }

  return all_ok ? 0 : 1;
}