#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "celldrain/simulation.hpp"

// Structured key-value configuration file: [section] headers, one key per
// line, '#' comments. Unknown sections and keys are errors (fail-closed);
// missing keys fall back to the documented defaults. The full schema lives
// in docs/config.md next to the shipped config/default.cfg.
namespace celldrain {

struct ProjectConfig {
  BatteryParams battery;            // nominal parameter set
  PerturbationSpec perturbation;    // plant mismatch magnitudes
  std::uint64_t plant_seed = 7;

  KalmanConfig kalman = KalmanConfig::defaults();
  bool measurement_noise = true;

  double dt_control_pi = 1.0;       // s, CC-CV / CC-CT loops
  double dt_control_opt = 20.0;     // s, DP / MPC loops
  double dt_plant = 0.1;            // s
  double t_max_sim = 8.0 * 3600.0;  // s
  double soe_stop = 1e-3;
  double t_constraint = 40.0;       // degC
  std::uint64_t noise_seed = 42;
  std::string simulate_controller = "mpc";
  std::vector<std::string> benchmark_controllers;

  DisturbanceIdConfig disturbance;

  // Controller sections by name (cc_cv, cc_ct1, cc_ct2, dp, mpc, ...).
  std::map<std::string, ControllerSpec> controllers;

  // The perturbed plant realization for this configuration.
  BatteryParams perturbed_plant() const;

  // Assembles the closed-loop configuration for one controller section.
  SimConfig sim_config_for(const std::string& name) const;
  std::vector<SimConfig> benchmark_configs() const;
};

// Parses and validates; throws ConfigError with "path:line:" prefixes.
ProjectConfig load_config(const std::string& path);

// FNV-1a hash of the raw config bytes, for output headers.
std::string config_hash_hex(const std::string& path);

}  // namespace celldrain
