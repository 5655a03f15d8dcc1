#include "celldrain/estimation.hpp"

#include <algorithm>
#include <cmath>

namespace celldrain {

namespace {

void check_spsd(const Eigen::MatrixXd& m, const char* name, bool strictly) {
  if (!m.isApprox(m.transpose(), 1e-9)) {
    throw ConfigError(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  const double min_eig = es.eigenvalues().minCoeff();
  if (strictly ? !(min_eig > 0.0) : min_eig < -1e-12) {
    throw ConfigError(std::string(name) +
                      (strictly ? " must be positive definite"
                                : " must be positive semidefinite"));
  }
}

Mat4 symmetrized(const Mat4& p) { return 0.5 * (p + p.transpose()); }

}  // namespace

void KalmanConfig::validate() const {
  check_spsd(process_cov, "process_cov", false);
  check_spsd(measurement_cov, "measurement_cov", true);
  check_spsd(initial_cov, "initial_cov", true);
}

KalmanConfig KalmanConfig::defaults() {
  KalmanConfig cfg;
  cfg.process_cov = Vec4(1e-8, 1e-6, 1e-4, 1e-4).asDiagonal();
  cfg.measurement_cov = Vec2(0.05 * 0.05, 0.01 * 0.01).asDiagonal();
  cfg.initial_cov = Vec4(0.04, 1e-4, 1.0, 1.0).asDiagonal();
  return cfg;
}

EstimatorState make_estimator(const BatteryState& x0, const KalmanConfig& cfg,
                              const BatteryParams& params, double dt) {
  cfg.validate();
  return EstimatorState{x0, cfg.initial_cov, linearize(x0, 0.0, dt, params)};
}

EstimatorState kf_predict(const EstimatorState& est, double u,
                          const KalmanConfig& cfg, const BatteryParams& params,
                          double dt) {
  const LinearModel lin = linearize(est.x_hat, u, dt, params);
  EstimatorState out;
  out.x_hat = BatteryState::from_vec(lin.x_next_op);
  out.p_cov = symmetrized(lin.a_matrix * est.p_cov * lin.a_matrix.transpose() +
                          cfg.process_cov);
  out.model = linearize(out.x_hat, u, dt, params);
  return out;
}

Vec2 measurement_model(const BatteryState& state, double u,
                       const BatteryParams& params) {
  return Vec2(state.t_s, terminal_voltage(state, u, params));
}

EstimatorState kf_update(const EstimatorState& est, const Vec2& z_meas, double u,
                         const KalmanConfig& cfg, const BatteryParams& params) {
  if (!z_meas.allFinite()) throw std::invalid_argument("measurement is not finite");

  Eigen::Matrix<double, 2, 4> h;
  h.setZero();
  h(0, 2) = 1.0;                                             // Ts
  h(1, 0) = ocv_slope(est.x_hat.soc, params.ocv_curve);      // dV/dSoC
  h(1, 1) = -1.0;                                            // V sags with V1

  const Vec2 innovation = z_meas - measurement_model(est.x_hat, u, params);
  const Eigen::Matrix2d s =
      h * est.p_cov * h.transpose() + cfg.measurement_cov;
  const Eigen::FullPivLU<Eigen::Matrix2d> lu(s);
  if (!lu.isInvertible()) {
    throw EstimatorDegenerateError("kf_update: singular innovation covariance");
  }
  const Eigen::Matrix<double, 4, 2> gain = est.p_cov * h.transpose() * lu.inverse();

  Vec4 x_new = est.x_hat.vec() + gain * innovation;
  x_new[0] = std::clamp(x_new[0], -0.01, 1.01);

  const Mat4 ikh = Mat4::Identity() - gain * h;
  const Mat4 p_new = symmetrized(ikh * est.p_cov * ikh.transpose() +
                                 gain * cfg.measurement_cov * gain.transpose());

  return EstimatorState{BatteryState::from_vec(x_new), p_new, est.model};
}

EnergyAccount soe_tracker_step(const EnergyAccount& account, double v_meas,
                               double i_applied, double dt,
                               const BatteryParams& params) {
  return soe_step(account, v_meas, i_applied, dt, params);
}

}  // namespace celldrain
