#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kprox/common.hpp"
#include "kprox/engine.hpp"
#include "kprox/solvers.hpp"

namespace kprox {

enum class ModelKind { competing_risks, gaussian_mixture };

// Parameters of the forward simulation producing a synthetic dataset.
struct SimulateBlock {
  int m = 0;
  long long N = 0;
  vec pi, p, q;
  double sac_frac = 0.0;
};

// Mixture shape; the observations themselves come from data_path.
struct MixtureBlock {
  int n_components = 2;
  double known_variance = 1.0;
};

struct ExperimentConfig {
  ModelKind model = ModelKind::competing_risks;
  std::string data_path;  // empty when simulating
  bool has_simulate = false;
  SimulateBlock simulate;
  MixtureBlock mixture;
  RelaxationSchedule schedule;
  AnnealingConfig solver;
  bool solver_seed_set = false;
  StoppingRule stop;
  long long seed = 0;
  std::string output_dir = ".";
  bool augmented = true;
};

namespace detail {
using json = nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& msg) {
  throw std::runtime_error("config: " + msg);
}

inline void check_keys(const json& obj, const std::vector<std::string>& allowed,
                       const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& key : allowed)
      if (it.key() == key) {
        ok = true;
        break;
      }
    if (!ok) config_fail("unknown key '" + it.key() + "' in " + where);
  }
}

inline double get_number(const json& obj, const char* key, double fallback,
                         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) config_fail(std::string(key) + " in " + where + " must be a number");
  return obj[key].get<double>();
}

inline long long get_integer(const json& obj, const char* key, long long fallback,
                             const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    config_fail(std::string(key) + " in " + where + " must be an integer");
  return obj[key].get<long long>();
}

inline vec get_real_array(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key) || !obj[key].is_array())
    config_fail(std::string(key) + " in " + where + " must be an array of numbers");
  vec out;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) config_fail(std::string(key) + " in " + where + " must hold numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}
}  // namespace detail

inline ExperimentConfig parse_config(const std::string& text) {
  using detail::config_fail;
  detail::json root;
  try {
    root = detail::json::parse(text);
  } catch (const std::exception& e) {
    config_fail(std::string("not valid JSON: ") + e.what());
  }
  if (!root.is_object()) config_fail("top level must be an object");
  detail::check_keys(root,
                     {"model", "data_path", "simulate", "mixture", "schedule", "solver",
                      "stop", "seed", "output_dir", "augmented"},
                     "top level");

  ExperimentConfig cfg;
  if (!root.contains("model") || !root["model"].is_string())
    config_fail("'model' is required and must be a string");
  const std::string model = root["model"].get<std::string>();
  if (model == "competing_risks")
    cfg.model = ModelKind::competing_risks;
  else if (model == "gaussian_mixture")
    cfg.model = ModelKind::gaussian_mixture;
  else
    config_fail("model must be 'competing_risks' or 'gaussian_mixture', got '" + model + "'");

  if (root.contains("data_path")) {
    if (!root["data_path"].is_string()) config_fail("data_path must be a string");
    cfg.data_path = root["data_path"].get<std::string>();
  }
  if (root.contains("simulate")) {
    if (cfg.model != ModelKind::competing_risks)
      config_fail("simulate block applies to the competing_risks model only");
    const auto& sim = root["simulate"];
    if (!sim.is_object()) config_fail("simulate must be an object");
    detail::check_keys(sim, {"m", "N", "pi", "p", "q", "sac_frac"}, "simulate");
    cfg.simulate.m = static_cast<int>(detail::get_integer(sim, "m", 0, "simulate"));
    cfg.simulate.N = detail::get_integer(sim, "N", 0, "simulate");
    cfg.simulate.pi = detail::get_real_array(sim, "pi", "simulate");
    cfg.simulate.p = detail::get_real_array(sim, "p", "simulate");
    cfg.simulate.q = detail::get_real_array(sim, "q", "simulate");
    cfg.simulate.sac_frac = detail::get_number(sim, "sac_frac", 0.0, "simulate");
    cfg.has_simulate = true;
  }
  if (cfg.data_path.empty() == !cfg.has_simulate)
    config_fail("exactly one of data_path / simulate must be present");
  if (!cfg.data_path.empty() && !std::filesystem::exists(cfg.data_path))
    config_fail("data_path '" + cfg.data_path + "' does not exist");

  if (cfg.model == ModelKind::gaussian_mixture) {
    if (!root.contains("mixture")) config_fail("'mixture' block is required for gaussian_mixture");
    const auto& mix = root["mixture"];
    if (!mix.is_object()) config_fail("mixture must be an object");
    detail::check_keys(mix, {"n_components", "known_variance"}, "mixture");
    cfg.mixture.n_components =
        static_cast<int>(detail::get_integer(mix, "n_components", 2, "mixture"));
    cfg.mixture.known_variance = detail::get_number(mix, "known_variance", 1.0, "mixture");
  } else if (root.contains("mixture")) {
    config_fail("mixture block applies to the gaussian_mixture model only");
  }

  if (root.contains("schedule")) {
    const auto& sch = root["schedule"];
    if (!sch.is_object()) config_fail("schedule must be an object");
    detail::check_keys(sch, {"kind", "beta0", "decay", "floor"}, "schedule");
    if (sch.contains("kind")) {
      if (!sch["kind"].is_string()) config_fail("schedule kind must be a string");
      const std::string kind = sch["kind"].get<std::string>();
      if (kind == "constant")
        cfg.schedule.kind = RelaxationSchedule::Kind::constant;
      else if (kind == "geometric")
        cfg.schedule.kind = RelaxationSchedule::Kind::geometric;
      else
        config_fail("schedule kind must be 'constant' or 'geometric', got '" + kind + "'");
    }
    cfg.schedule.beta0 = detail::get_number(sch, "beta0", cfg.schedule.beta0, "schedule");
    cfg.schedule.decay = detail::get_number(sch, "decay", cfg.schedule.decay, "schedule");
    cfg.schedule.floor = detail::get_number(sch, "floor", cfg.schedule.floor, "schedule");
  }

  if (root.contains("solver")) {
    const auto& sol = root["solver"];
    if (!sol.is_object()) config_fail("solver must be an object");
    detail::check_keys(
        sol, {"budget", "temp0", "cooling", "proposal_scale0", "scale_cooling", "seed"},
        "solver");
    cfg.solver.budget =
        static_cast<int>(detail::get_integer(sol, "budget", cfg.solver.budget, "solver"));
    cfg.solver.temp0 = detail::get_number(sol, "temp0", cfg.solver.temp0, "solver");
    cfg.solver.cooling = detail::get_number(sol, "cooling", cfg.solver.cooling, "solver");
    cfg.solver.proposal_scale0 =
        detail::get_number(sol, "proposal_scale0", cfg.solver.proposal_scale0, "solver");
    cfg.solver.scale_cooling =
        detail::get_number(sol, "scale_cooling", cfg.solver.scale_cooling, "solver");
    if (sol.contains("seed")) {
      cfg.solver.seed =
          static_cast<std::uint64_t>(detail::get_integer(sol, "seed", 0, "solver"));
      cfg.solver_seed_set = true;
    }
  }

  if (root.contains("stop")) {
    const auto& stp = root["stop"];
    if (!stp.is_object()) config_fail("stop must be an object");
    detail::check_keys(stp, {"max_iters", "loglik_tol", "step_tol"}, "stop");
    cfg.stop.max_iters =
        static_cast<int>(detail::get_integer(stp, "max_iters", cfg.stop.max_iters, "stop"));
    cfg.stop.loglik_tol = detail::get_number(stp, "loglik_tol", cfg.stop.loglik_tol, "stop");
    cfg.stop.step_tol = detail::get_number(stp, "step_tol", cfg.stop.step_tol, "stop");
  }

  cfg.seed = detail::get_integer(root, "seed", 0, "top level");
  if (root.contains("output_dir")) {
    if (!root["output_dir"].is_string()) config_fail("output_dir must be a string");
    cfg.output_dir = root["output_dir"].get<std::string>();
  }
  if (root.contains("augmented")) {
    if (!root["augmented"].is_boolean()) config_fail("augmented must be a boolean");
    cfg.augmented = root["augmented"].get<bool>();
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

}  // namespace kprox
