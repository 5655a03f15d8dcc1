#include "celldrain/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace celldrain {

namespace {

// Velocity-form PI update: du = kp*(e - e_prev) + ki*dt*e. The incremental
// form is bumpless across the CC->regulation switch (the state is the
// current itself) and clamping it is the anti-windup.
double pi_advance(const PiConfig& cfg, double error, double* prev_error,
                  bool* have_prev, double* u_state, double* u_unclamped,
                  double dt) {
  const double de = *have_prev ? error - *prev_error : 0.0;
  *prev_error = error;
  *have_prev = true;

  const double du = cfg.kp * de + cfg.ki * dt * error;
  if (cfg.anti_windup) {
    *u_state = std::clamp(*u_state + du, cfg.out_min, cfg.out_max);
    *u_unclamped = *u_state;
  } else {
    *u_unclamped += du;
    *u_state = std::clamp(*u_unclamped, cfg.out_min, cfg.out_max);
  }
  return *u_state;
}

std::string phase_diag(const char* phase, double error, double u) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "phase=%s;err=%.6g;u=%.6g", phase, error, u);
  return buf;
}

}  // namespace

CcCvController::CcCvController(const PiConfig& cfg, double cc_current,
                               double v_cutoff)
    : cfg_(cfg), cc_current_(cc_current), v_cutoff_(v_cutoff) {
  if (!(cfg.out_min <= cfg.out_max) || !std::isfinite(cfg.kp) ||
      !std::isfinite(cfg.ki)) {
    throw std::invalid_argument("CcCvController: bad PI configuration");
  }
  u_ = u_unclamped_ = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
}

ControllerCommand CcCvController::step(const ControllerInputs& in, double dt) {
  if (!cv_phase_ && in.v_meas <= v_cutoff_) {
    cv_phase_ = true;  // one-way switch
    u_ = u_unclamped_ = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
  }
  if (!cv_phase_) {
    const double u = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
    return {u, phase_diag("CC", 0.0, u)};
  }
  // Positive error = voltage above the setpoint = room to discharge harder;
  // a sagging voltage therefore reduces the current.
  const double error = in.v_meas - cfg_.setpoint;
  const double u = pi_advance(cfg_, error, &prev_error_, &have_prev_error_, &u_,
                              &u_unclamped_, dt);
  return {u, phase_diag("CV", error, u)};
}

CcCtController::CcCtController(const PiConfig& cfg, double cc_current,
                               double t_ref)
    : cfg_(cfg), cc_current_(cc_current), t_ref_(t_ref) {
  if (!(cfg.out_min <= cfg.out_max) || !std::isfinite(cfg.kp) ||
      !std::isfinite(cfg.ki)) {
    throw std::invalid_argument("CcCtController: bad PI configuration");
  }
  u_ = u_unclamped_ = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
}

ControllerCommand CcCtController::step(const ControllerInputs& in, double dt) {
  if (!ct_phase_ && in.x_est.t_c >= t_ref_) {
    ct_phase_ = true;  // one-way switch
    u_ = u_unclamped_ = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
  }
  if (!ct_phase_) {
    const double u = std::clamp(cc_current_, cfg_.out_min, cfg_.out_max);
    return {u, phase_diag("CC", 0.0, u)};
  }
  // Positive error = estimate below the reference = room to heat up.
  const double error = t_ref_ - in.x_est.t_c;
  const double u = pi_advance(cfg_, error, &prev_error_, &have_prev_error_, &u_,
                              &u_unclamped_, dt);
  return {u, phase_diag("CT", error, u)};
}

}  // namespace celldrain
