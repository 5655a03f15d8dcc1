#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "celldrain/battery.hpp"
#include "celldrain/controllers.hpp"
#include "celldrain/polytope.hpp"
#include "celldrain/qp.hpp"

// Tube-based robust MPC. A nominal trajectory is optimized under tightened
// constraints while the ancillary feedback u = u_nom + K(x - x_nom) confines
// the true state to a tube of cross-section R (the minimal-RPI outer
// approximation) around it.
//
// Set computations run in scaled state coordinates x_s = S^{-1} x with
// S = diag(1, 0.1 V, 10 degC, 10 degC); the input stays in amperes. The
// cached tightening margins below are converted back to physical units for
// the QP.
namespace celldrain {

// States are nondimensionalized by these factors before any set
// computation.
inline Vec4 state_scale() { return Vec4(1.0, 0.1, 10.0, 10.0); }

// Synthesis-time knobs (everything the paper leaves open is a field here).
struct MpcOptions {
  int horizon = 10;                     // N
  Vec2 q_diag = Vec2(1e4, 1e4);         // output weight on [SoE, Tc]
  double r_weight = 1.0;                // input weight
  Vec4 lqr_state_weights = Vec4(1.0, 1.0, 1.0, 100.0);  // on scaled states
  double lqr_input_weight = 1.0;
  double rate_limit = 1.0;              // |u(i+1)-u(i)| bound, A per step
  Vec2 y_target = Vec2(0.0, 40.0);      // [SoE*, Tc*]
  double t_max = 40.0;                  // degC, core temperature bound
  double u_max = 40.0;                  // A
  double dt = 20.0;                     // s
  double epsilon = 1e-3;                // RPI tolerance, scaled units
  bool input_delta_penalty = false;     // optional extra cost, default off
  double delta_weight = 0.0;
};

// Fully synthesized controller data. Produced by synthesize_mpc; immutable
// afterwards.
struct MpcConfig {
  int horizon;
  Vec2 q_diag;
  double r_weight;
  Eigen::RowVector4d k_gain;   // physical coordinates: u = K (x - x_nom)
  RpiResult rpi;               // scaled state coordinates
  Polytope tightened;          // L-bar in (scaled state, input), 5-D
  double rate_limit;
  Vec2 y_target;
  double dt;
  double t_max;
  double u_max;
  double tc_bound;             // tightened core-temperature bound, degC
  double u_lo, u_hi;           // tightened input bounds, A
  bool input_delta_penalty;
  double delta_weight;
};

// Builds the joint state/input constraint set L = {Tc <= t_max, 0 <= u <=
// u_max} in scaled coordinates (5-D).
Polytope make_state_input_constraints(double t_max, double u_max);

// Runs the full synthesis pipeline: K from LQR on the scaled model,
// R = mrpi(A+BK, W), K*R, R x K*R, and L-bar = L (-) (R x K*R). Throws
// OverTightenedError when the tightened set is empty and ConvergenceError
// when the RPI truncation fails.
MpcConfig synthesize_mpc(const LinearModel& model, const Polytope& constraints,
                         const Polytope& w_set, const MpcOptions& opts);

// Carry-over between consecutive mpc_step calls: the shifted previous
// nominal solution (warm start and infeasibility fallback) and the previous
// applied nominal input (cross-step rate tie).
struct MpcWarmStart {
  bool valid = false;
  Eigen::VectorXd u_nominal;        // previous nominal input plan
  Eigen::Matrix<double, 4, Eigen::Dynamic> x_nominal;  // previous nominal states
  double u_nom_prev = 0.0;          // nominal input applied last step
};

// One MPC step: builds the condensed QP over {x_nom(0), u_nom(0..N-1)},
// solves it, and returns u = u_nom*(0) + K (x_est - x_nom*(0)) saturated to
// [0, u_max]. On solver failure it falls back to the shifted previous
// solution (pure tube action); with no previous solution available it
// throws ControllerFaultError. `tube_ok` reports whether
// x_est - x_nom*(0) lies in R (tolerance 1e-6, scaled).
struct MpcStepResult {
  ControllerCommand command;
  double u_nominal0 = 0.0;
  Vec4 x_nominal0;
  bool tube_ok = true;
  bool fallback = false;
  int qp_iterations = 0;
};

MpcStepResult mpc_step(const BatteryState& x_est, double soe, const MpcConfig& cfg,
                       const LinearModel& model, const BatteryParams& params,
                       double u_prev, MpcWarmStart* warm);

// Harness-facing wrapper owning the warm start and the relinearization.
class MpcController {
 public:
  MpcController(MpcConfig cfg, BatteryParams model_params);

  ControllerCommand step(const ControllerInputs& in, double dt);
  int tube_violations() const { return tube_violations_; }
  const MpcConfig& config() const { return cfg_; }

 private:
  MpcConfig cfg_;
  BatteryParams params_;
  MpcWarmStart warm_;
  int tube_violations_ = 0;
};

}  // namespace celldrain
