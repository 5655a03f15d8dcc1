#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "celldrain/errors.hpp"

// Electrothermal equivalent-circuit model of a lithium-ion cell.
//
// State x = [SoC, V1, Ts, Tc]: state of charge, RC-pair voltage, surface
// temperature and core temperature. Input u = I is the discharge current.
//
// Sign convention (used consistently everywhere): discharge current is
// positive. A positive current drains SoC, charges the RC pair to a positive
// V1, and heats the core with I*(V1 + R0*I). The terminal voltage sags under
// load:
//
//   V = ocv(SoC) - V1 - R0*I
//
// Temperatures are in degrees Celsius throughout; the thermal equations are
// difference-based so the unit choice is consistent.
namespace celldrain {

using Vec2 = Eigen::Vector2d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

// Piecewise-linear open-circuit-voltage table, V = phi(SoC).
struct OcvCurve {
  std::vector<double> soc;      // breakpoints, strictly increasing in [0, 1]
  std::vector<double> voltage;  // strictly increasing with SoC

  void validate() const;  // throws ConfigError on a malformed table
};

// Physical constants of the cell plus the OCV table and energy bookkeeping
// constants. `validate()` enforces positivity and curve monotonicity.
struct BatteryParams {
  double capacity_nominal = 40.0;  // Ah
  double r0 = 5.0e-3;              // ohmic resistance, ohm
  double r1 = 2.5e-3;              // polarization resistance, ohm
  double c1 = 1.0e4;               // polarization capacitance, F
  double r_u = 1.5;                // convection resistance, K/W
  double r_c = 2.0;                // conduction resistance, K/W
  double c_s = 120.0;              // surface heat capacity, J/K
  double c_c = 80.0;               // core heat capacity, J/K
  double t_ambient = 20.0;         // degC
  OcvCurve ocv_curve;
  double energy_nominal = 0.0;     // total extractable energy, J
  double eta = 1.0;                // energy efficiency in (0, 1]

  void validate() const;
};

// Returns the default parameter set shipped with the toolkit (a generic
// 40 Ah NMC-like cell; see docs/config.md for the tuning procedure).
BatteryParams default_params();

struct BatteryState {
  double soc = 1.0;   // state of charge, dimensionless
  double v1 = 0.0;    // RC-pair voltage, V
  double t_s = 20.0;  // surface temperature, degC
  double t_c = 20.0;  // core temperature, degC

  Vec4 vec() const { return Vec4(soc, v1, t_s, t_c); }
  static BatteryState from_vec(const Vec4& x) { return {x[0], x[1], x[2], x[3]}; }
  bool finite() const;
};

// Discrete affine model x(k+1) ~= step(x_op, u_op) + A*(x - x_op) + B*(u - u_op)
// obtained by linearizing the continuous dynamics at an operating point and
// discretizing over `dt`.
struct LinearModel {
  Mat4 a_matrix;
  Vec4 b_matrix;
  BatteryState x_op;
  double u_op = 0.0;
  double dt = 0.0;
  Vec4 x_next_op;  // discretized nonlinear step at the operating point

  // One-step prediction of the affine model.
  Vec4 predict(const Vec4& x, double u) const {
    return x_next_op + a_matrix * (x - x_op.vec()) + b_matrix * (u - u_op);
  }
};

// Cumulative extracted energy Eo and the state of energy it implies,
// SoE = 1 - Eo/En. Updated by soe_step with a rectangle rule.
struct EnergyAccount {
  double extracted = 0.0;  // J
  double soe = 1.0;
};

enum class Discretization { kMatrixExponential, kEuler };

// --- Continuous dynamics -----------------------------------------------

// Time derivatives [dSoC/dt, dV1/dt, dTs/dt, dTc/dt] of the electrothermal
// model. The 3600 converts the Ah capacity to As; the core heat source is
// I*(V1 + R0*I). Throws std::invalid_argument on non-finite input.
Vec4 state_derivative(const BatteryState& state, double current,
                      const BatteryParams& params);

// Terminal voltage V = phi(SoC) - V1 - R0*I (discharge-positive convention,
// see the namespace comment).
double terminal_voltage(const BatteryState& state, double current,
                        const BatteryParams& params);

// Piecewise-linear interpolation of the OCV table; clamps to the end values
// outside the breakpoint range. Throws ConfigError on an empty curve.
double ocv_interpolate(double soc, const OcvCurve& curve);

// Slope dphi/dSoC of the interpolant (right-continuous at breakpoints;
// zero in the clamped regions).
double ocv_slope(double soc, const OcvCurve& curve);

// --- Integration and linearization -------------------------------------

// One classical RK4 step with the current held constant over [t, t+dt].
// SoC is clamped to [0, 1] after the step. Throws NumericalBlowupError if
// the step produces a non-finite state.
BatteryState integrate_step(const BatteryState& state, double current, double dt,
                            const BatteryParams& params);

// Integrates over `dt` with fixed RK4 sub-steps of at most `dt_sub`
// (zero-order hold on the current). This is the plant-side integrator.
BatteryState integrate_hold(const BatteryState& state, double current, double dt,
                            const BatteryParams& params, double dt_sub = 0.1);

// Analytic continuous-time Jacobians (df/dx, df/du) at an operating point.
void continuous_jacobians(const BatteryState& state, double current,
                          const BatteryParams& params, Mat4* df_dx, Vec4* df_du);

// Linearizes at (state, current) and discretizes over dt. The default
// discretization is the exact matrix exponential of the augmented Jacobian
// (Euler is available behind the flag but too coarse for dt near 20 s).
LinearModel linearize(const BatteryState& state, double current, double dt,
                      const BatteryParams& params,
                      Discretization method = Discretization::kMatrixExponential);

// --- Energy accounting --------------------------------------------------

// SoE(k) = SoE(k-1) - eta*V(k-1)*I(k-1)*dt/En; `extracted` accumulates the
// same rectangle rule so that soe == 1 - extracted/energy_nominal holds
// exactly after every step.
EnergyAccount soe_step(const EnergyAccount& account, double v_prev, double i_prev,
                       double dt, const BatteryParams& params);

// --- Plant perturbation -------------------------------------------------

// Relative perturbation magnitudes per physical constant, each in [0, 0.5].
// `ocv` bounds the smooth OCV offset at ocv*100 mV. Ambient temperature,
// nominal energy and eta are never perturbed (the room does not change and
// En is assumed known).
struct PerturbationSpec {
  double capacity = 0.0;
  double r0 = 0.0;
  double r1 = 0.0;
  double c1 = 0.0;
  double r_u = 0.0;
  double r_c = 0.0;
  double c_s = 0.0;
  double c_c = 0.0;
  double ocv = 0.0;

  void validate() const;
};

// Returns a copy of `params` with each constant scaled by an independent
// deterministic factor in [1-p, 1+p] drawn from the seeded generator, and
// the OCV voltages shifted by a smooth offset bounded by p*100 mV. Same
// seed, same output.
BatteryParams make_perturbed_plant(const BatteryParams& params,
                                   const PerturbationSpec& perturbation,
                                   std::uint64_t seed);

}  // namespace celldrain
