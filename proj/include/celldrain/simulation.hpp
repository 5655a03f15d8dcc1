#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "celldrain/battery.hpp"
#include "celldrain/controllers.hpp"
#include "celldrain/dp.hpp"
#include "celldrain/estimation.hpp"
#include "celldrain/mpc.hpp"
#include "celldrain/polytope.hpp"

// Closed-loop harness: perturbed nonlinear plant, Kalman estimator, SoE
// tracker and one of the discharge controllers, stepped at the controller
// sampling time while the plant integrates at a finer fixed step. Controllers
// only ever see measurements and estimates.
namespace celldrain {

enum class ControllerKind { kCcCv, kCcCt, kDp, kMpc };

// Tagged controller configuration (one section of the config file).
struct ControllerSpec {
  ControllerKind kind = ControllerKind::kCcCv;
  std::string name = "cc_cv";
  PiConfig pi;
  double cc_current = 40.0;  // A, CC phase
  double v_cutoff = 3.45;    // V, CC->CV switch
  double t_ref = 40.0;       // degC, CC->CT switch and CT setpoint
  DpConfig dp = DpConfig::defaults();
  MpcOptions mpc;
};

// Disturbance-set identification: one-step residuals between the perturbed
// plant and the (periodically refrozen) linearized nominal model, collected
// over a seeded library of current profiles and boxed with inflation.
struct DisturbanceIdConfig {
  std::uint64_t seed = 99;
  double dt = 20.0;
  int relinearize_steps = 10;  // model frozen for this many steps (mirrors the horizon)
  double inflation = 0.25;     // relative box inflation
  double floor = 1e-6;         // minimum half-width per scaled coordinate
  int random_profiles = 4;     // seeded piecewise-constant profiles
  double soc_stop = 0.05;      // profile simulation cutoff
};

struct SimConfig {
  BatteryParams plant_params;   // perturbed truth
  BatteryParams model_params;   // nominal design model
  ControllerSpec controller;
  KalmanConfig kalman = KalmanConfig::defaults();
  double dt_control = 1.0;      // s
  double dt_plant = 0.1;        // s, plant integrator sub-step
  double t_max_sim = 8.0 * 3600.0;
  double soe_stop = 1e-3;       // "fully discharged" threshold
  std::uint64_t noise_seed = 42;
  double t_constraint = 40.0;   // degC, benchmark verdict threshold
  bool measurement_noise = true;
  BatteryState x0{1.0, 0.0, 20.0, 20.0};
  DisturbanceIdConfig disturbance;

  void validate() const;  // throws ConfigError
};

struct SimRow {
  double t;
  double i_applied;
  double v_terminal;
  double soc_true;
  double soe;
  double t_s;
  double t_c_true;
  double t_c_est;
  std::string diag;
};

struct SimTrace {
  std::vector<SimRow> rows;
};

enum class SimEnd { kDischarged, kTimeout, kFault };

struct SimResult {
  std::string method;
  SimTrace trace;
  SimEnd end = SimEnd::kTimeout;
  double discharge_time = 0.0;  // s, first crossing of soe_stop
  double max_tc_true = 0.0;     // degC over the whole run
  double extracted_energy = 0.0;
  int tube_violations = 0;      // MPC only
  std::string fault_message;
};

SimResult run_closed_loop(const SimConfig& cfg);

struct BenchmarkRow {
  std::string method;
  double discharge_time = 0.0;
  double max_core_temp = 0.0;
  bool constraint_satisfied = false;  // max_core_temp <= t_constraint
  bool completed = false;             // discharged (neither timeout nor fault)
  std::string note;
};

struct BenchmarkResult {
  std::vector<BenchmarkRow> rows;
  std::vector<SimResult> runs;
  bool any_failed = false;
};

// Runs every configuration (in parallel when allowed), merging results in
// configuration order. Individual failures become rows, never aborts.
BenchmarkResult run_benchmark(const std::vector<SimConfig>& cfgs,
                              bool parallel = true);

// Residual-box disturbance identification; the returned polytope lives in
// scaled state coordinates and contains the origin in its interior.
Polytope identify_disturbance_set(const BatteryParams& plant,
                                  const BatteryParams& model,
                                  const DisturbanceIdConfig& cfg);

// Full MPC synthesis pipeline for a configuration: identification,
// linearization at the temperature-ride operating point, gain and set
// computation.
struct SynthesisOutput {
  Polytope w_set;      // scaled coordinates
  LinearModel model;   // linearization at the synthesis operating point
  MpcConfig mpc;
};

SynthesisOutput synthesize_for(const SimConfig& cfg);

// Reference CC-CV discharge (ideal constant-voltage loop) on the nominal
// plant, integrating terminal power until the current decays to i_cutoff.
// This is how the shipped energy_nominal value was produced.
double calibrate_nominal_energy(const BatteryParams& params, double cc_current,
                                double v_cutoff, double i_cutoff,
                                double dt = 1.0);

}  // namespace celldrain
