#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kprox/config.hpp"
#include "kprox/diagnostics.hpp"
#include "kprox/engine.hpp"
#include "kprox/io.hpp"
#include "kprox/models/competing_risks.hpp"
#include "kprox/models/gaussian_mixture.hpp"

namespace kprox {

// Exit-status contract shared by all subcommands:
//   0 clean termination, 1 solver failure, 2 monotonicity violation,
//   3 configuration, data, or precondition error (mapped by the caller).
inline constexpr int exit_ok = 0;
inline constexpr int exit_solver_failure = 1;
inline constexpr int exit_monotonicity = 2;
inline constexpr int exit_usage = 3;

struct PreparedExperiment {
  ProximalProblem problem;
  vec theta0;
  std::vector<std::string> param_names;
  RelaxationSchedule schedule;
  AnnealingConfig solver_cfg;
  StoppingRule stop;
};

// Seed precedence: the --seed flag beats solver.seed, which beats the
// top-level config seed. The top-level seed also drives the simulator, so one
// integer pins the whole experiment.
inline PreparedExperiment prepare_experiment(const ExperimentConfig& cfg,
                                             std::optional<long long> seed_override = {},
                                             std::optional<double> beta_override = {}) {
  PreparedExperiment prep;
  const long long base_seed = seed_override ? *seed_override : cfg.seed;

  prep.solver_cfg = cfg.solver;
  if (seed_override)
    prep.solver_cfg.seed = static_cast<std::uint64_t>(*seed_override);
  else if (!cfg.solver_seed_set)
    prep.solver_cfg.seed = static_cast<std::uint64_t>(cfg.seed);

  prep.schedule = cfg.schedule;
  if (beta_override) {
    prep.schedule = RelaxationSchedule{};
    prep.schedule.kind = RelaxationSchedule::Kind::constant;
    prep.schedule.beta0 = *beta_override;
  }
  prep.stop = cfg.stop;

  if (cfg.model == ModelKind::competing_risks) {
    CompetingRisksData data;
    if (cfg.has_simulate) {
      const CompetingRisksParams truth{cfg.simulate.pi, cfg.simulate.p, cfg.simulate.q};
      data = cr_simulate(cfg.simulate.m, cfg.simulate.N, truth,
                         static_cast<std::uint64_t>(base_seed), cfg.simulate.sac_frac);
    } else {
      data = read_data_csv_file(cfg.data_path);
    }
    prep.problem = cr_problem(data, cfg.augmented);
    prep.theta0 = cr_default_start(data.m);
    prep.param_names = cr_param_names(data.m);
  } else {
    GaussianMixtureModel model{read_observations_csv_file(cfg.data_path),
                               cfg.mixture.n_components, cfg.mixture.known_variance};
    prep.problem = gmm_problem(model);
    prep.theta0 = gmm_default_start(model);
    prep.param_names = gmm_param_names(model.n_components);
  }
  return prep;
}

namespace detail {
inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}
}  // namespace detail

inline int run_fit(const ExperimentConfig& cfg, std::optional<long long> seed_override = {},
                   std::optional<double> beta_override = {},
                   const std::string& output_override = {}) {
  const PreparedExperiment prep = prepare_experiment(cfg, seed_override, beta_override);
  const std::filesystem::path out_dir =
      output_override.empty() ? cfg.output_dir : output_override;
  std::filesystem::create_directories(out_dir);

  RunTrace trace;
  try {
    trace = run(prep.problem, prep.schedule, annealing_solver(prep.solver_cfg), prep.theta0,
                prep.stop);
  } catch (const monotonicity_error& e) {
    std::cerr << "fit aborted: " << e.what() << "\n";
    return exit_monotonicity;
  }

  {
    auto out = detail::open_out(out_dir / "trace.csv");
    write_trace_csv(out, trace, prep.param_names);
  }
  {
    auto out = detail::open_out(out_dir / "final_params.csv");
    write_params_csv(out, prep.param_names, trace.final_theta);
  }
  {
    auto out = detail::open_out(out_dir / "kkt_report.txt");
    write_kkt_report(out, kkt_check(prep.problem, trace.final_theta));
  }
  if (trace.termination == Termination::solver_failure) {
    std::cerr << "fit ended in solver failure at iteration "
              << (trace.records.size() - 1) << "\n";
    return exit_solver_failure;
  }
  return exit_ok;
}

inline int run_sweep(const ExperimentConfig& cfg, const std::vector<double>& betas,
                     const std::vector<long long>& seeds,
                     const std::string& output_override = {}) {
  if (betas.empty() || seeds.empty())
    throw std::invalid_argument("sweep: betas and seeds must be nonempty");
  const std::filesystem::path out_dir =
      output_override.empty() ? cfg.output_dir : output_override;
  std::filesystem::create_directories(out_dir);

  std::vector<SweepRow> rows;
  for (double beta : betas) {
    for (long long seed : seeds) {
      SweepRow row;
      row.beta = beta;
      row.seed = seed;
      row.final_loglik = std::numeric_limits<double>::quiet_NaN();
      row.loglik_at_50 = std::numeric_limits<double>::quiet_NaN();
      try {
        const PreparedExperiment prep = prepare_experiment(cfg, seed, beta);
        const RunTrace trace = run(prep.problem, prep.schedule,
                                   annealing_solver(prep.solver_cfg), prep.theta0, prep.stop);
        row.iterations = static_cast<int>(trace.records.size()) - 1;
        row.final_loglik = trace.records.back().loglik;
        const std::size_t at50 =
            std::min<std::size_t>(50, trace.records.size() - 1);
        row.loglik_at_50 = trace.records[at50].loglik;
        row.terminated_by = to_string(trace.termination);
        auto out = detail::open_out(out_dir / ("trace_beta" + fmt17(beta) + "_seed" +
                                               std::to_string(seed) + ".csv"));
        write_trace_csv(out, trace, prep.param_names);
      } catch (const monotonicity_error& e) {
        std::cerr << "sweep run (beta=" << fmt17(beta) << ", seed=" << seed
                  << ") aborted: " << e.what() << "\n";
        row.terminated_by = "monotonicity_violation";
      } catch (const std::exception& e) {
        std::cerr << "sweep run (beta=" << fmt17(beta) << ", seed=" << seed
                  << ") failed: " << e.what() << "\n";
        row.terminated_by = "error";
      }
      rows.push_back(std::move(row));
    }
  }
  auto out = detail::open_out(out_dir / "sweep_summary.csv");
  write_sweep_summary(out, rows);
  return exit_ok;
}

inline int run_simulate(const ExperimentConfig& cfg, std::optional<long long> seed_override = {},
                        const std::string& output_override = {}) {
  if (!cfg.has_simulate)
    throw std::invalid_argument("simulate: config has no simulate block");
  const long long base_seed = seed_override ? *seed_override : cfg.seed;
  const CompetingRisksParams truth{cfg.simulate.pi, cfg.simulate.p, cfg.simulate.q};
  const CompetingRisksData data =
      cr_simulate(cfg.simulate.m, cfg.simulate.N, truth,
                  static_cast<std::uint64_t>(base_seed), cfg.simulate.sac_frac);
  const std::filesystem::path out_dir =
      output_override.empty() ? cfg.output_dir : output_override;
  std::filesystem::create_directories(out_dir);
  auto out = detail::open_out(out_dir / "data.csv");
  write_data_csv(out, data);
  return exit_ok;
}

}  // namespace kprox
