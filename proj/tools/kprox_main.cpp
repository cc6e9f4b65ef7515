#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kprox/kprox.hpp"

namespace {

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::optional<long long> seed;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "Experiment config (JSON)")
      ->required();
  cmd->add_option("--output", flags.output_dir, "Output directory (overrides config)");
  cmd->add_option("--seed", flags.seed, "Seed override (overrides config)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kullback-proximal point solver"};
  app.require_subcommand(1);

  CommonFlags fit_flags, sweep_flags, sim_flags;
  std::optional<double> beta;
  std::vector<double> betas;
  std::vector<long long> seeds;

  CLI::App* fit = app.add_subcommand("fit", "Run one KPP fit");
  add_common(fit, fit_flags);
  fit->add_option("--beta", beta, "Constant relaxation value (overrides schedule)");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a beta x seed cross product");
  add_common(sweep, sweep_flags);
  sweep->add_option("--betas", betas, "Relaxation values")->delimiter(',')->required();
  sweep->add_option("--seeds", seeds, "Seeds")->delimiter(',')->required();

  CLI::App* simulate = app.add_subcommand("simulate", "Write a synthetic dataset");
  add_common(simulate, sim_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kprox::exit_usage;
  }

  try {
    if (fit->parsed()) {
      const auto cfg = kprox::load_config(fit_flags.config_path);
      return kprox::run_fit(cfg, fit_flags.seed, beta, fit_flags.output_dir);
    }
    if (sweep->parsed()) {
      const auto cfg = kprox::load_config(sweep_flags.config_path);
      if (sweep_flags.seed)
        std::cerr << "note: --seed is ignored by sweep; use --seeds\n";
      return kprox::run_sweep(cfg, betas, seeds, sweep_flags.output_dir);
    }
    const auto cfg = kprox::load_config(sim_flags.config_path);
    return kprox::run_simulate(cfg, sim_flags.seed, sim_flags.output_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kprox::exit_usage;
  }
}
