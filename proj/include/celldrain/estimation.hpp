#pragma once

#include <Eigen/Dense>

#include "celldrain/battery.hpp"

// Extended Kalman filter reconstructing x = [SoC, V1, Ts, Tc] from the
// measured output z = [Ts, V], relinearized at every predict step. Also
// hosts the SoE tracker fed by measured voltage and applied current, so the
// controller-facing state of energy never reads plant internals.
namespace celldrain {

struct KalmanConfig {
  Mat4 process_cov;                  // Q, symmetric PSD
  Eigen::Matrix2d measurement_cov;   // R, symmetric PD
  Mat4 initial_cov;                  // P0, symmetric PD

  void validate() const;  // throws ConfigError
  static KalmanConfig defaults();
};

struct EstimatorState {
  BatteryState x_hat;
  Mat4 p_cov;
  LinearModel model;  // linearization currently in use
};

// Builds an estimator at the given initial guess.
EstimatorState make_estimator(const BatteryState& x0, const KalmanConfig& cfg,
                              const BatteryParams& params, double dt);

// Propagates the mean through the full nonlinear dynamics and the
// covariance through the Jacobian at the previous estimate; the model is
// refreshed at the new operating point.
EstimatorState kf_predict(const EstimatorState& est, double u,
                          const KalmanConfig& cfg, const BatteryParams& params,
                          double dt);

// Measurement update with the analytic output Jacobian
//   H = [0 0 1 0; dphi/dSoC -1 0 0]
// (voltage row follows the discharge-sag convention). Joseph-form
// covariance update. Throws EstimatorDegenerateError on a singular
// innovation covariance.
EstimatorState kf_update(const EstimatorState& est, const Vec2& z_meas, double u,
                         const KalmanConfig& cfg, const BatteryParams& params);

// Predicted measurement [Ts, V] at a state.
Vec2 measurement_model(const BatteryState& state, double u,
                       const BatteryParams& params);

// Controller-facing SoE bookkeeping from measured voltage and applied
// current; delegates to soe_step.
EnergyAccount soe_tracker_step(const EnergyAccount& account, double v_meas,
                               double i_applied, double dt,
                               const BatteryParams& params);

}  // namespace celldrain
