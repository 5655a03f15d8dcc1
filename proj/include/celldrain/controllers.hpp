#pragma once

#include <string>

#include "celldrain/battery.hpp"

namespace celldrain {

// One controller decision: the discharge current to apply over the next
// control interval, plus an opaque diagnostics record for the trace.
// The interface saturates every command into [0, u_max].
struct ControllerCommand {
  double current = 0.0;      // A
  std::string diagnostics;   // compact "key=value;..." record
};

// What a controller is allowed to see: measurements and estimates only,
// never plant truth. The harness builds this each control instant.
struct ControllerInputs {
  double t = 0.0;        // s
  double v_meas = 0.0;   // measured terminal voltage, V
  BatteryState x_est;    // Kalman estimate
  double soe = 1.0;      // tracker state of energy
  double u_prev = 0.0;   // previously applied current, A
};

// Velocity-form PI configuration. `setpoint` carries the unit of the
// regulated variable (V for CV, degC for CT).
struct PiConfig {
  double kp = 0.0;
  double ki = 0.0;
  double setpoint = 0.0;
  double out_min = 0.0;
  double out_max = 40.0;
  bool anti_windup = true;  // clamp the internal state, not just the output
};

// Two-phase constant current / constant voltage discharge: CC at
// `cc_current` until the measured voltage sags to `v_cutoff`, then PI
// regulation of the voltage. The phase switch is one-way.
class CcCvController {
 public:
  CcCvController(const PiConfig& cfg, double cc_current, double v_cutoff);

  ControllerCommand step(const ControllerInputs& in, double dt);
  bool in_cv_phase() const { return cv_phase_; }

 private:
  PiConfig cfg_;
  double cc_current_;
  double v_cutoff_;
  bool cv_phase_ = false;
  bool have_prev_error_ = false;
  double prev_error_ = 0.0;
  double u_ = 0.0;
  double u_unclamped_ = 0.0;
};

// Two-phase constant current / constant temperature discharge: CC until the
// estimated core temperature reaches `t_ref`, then PI regulation of the
// estimate at `t_ref`.
class CcCtController {
 public:
  CcCtController(const PiConfig& cfg, double cc_current, double t_ref);

  ControllerCommand step(const ControllerInputs& in, double dt);
  bool in_ct_phase() const { return ct_phase_; }

 private:
  PiConfig cfg_;
  double cc_current_;
  double t_ref_;
  bool ct_phase_ = false;
  bool have_prev_error_ = false;
  double prev_error_ = 0.0;
  double u_ = 0.0;
  double u_unclamped_ = 0.0;
};

}  // namespace celldrain
