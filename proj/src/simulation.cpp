#include "celldrain/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <random>
#include <variant>

namespace celldrain {

namespace {

using ControllerVariant =
    std::variant<CcCvController, CcCtController, DpController, MpcController>;

ControllerVariant make_controller(const SimConfig& cfg) {
  const ControllerSpec& spec = cfg.controller;
  switch (spec.kind) {
    case ControllerKind::kCcCv:
      return CcCvController(spec.pi, spec.cc_current, spec.v_cutoff);
    case ControllerKind::kCcCt:
      return CcCtController(spec.pi, spec.cc_current, spec.t_ref);
    case ControllerKind::kDp:
      return DpController(spec.dp, cfg.model_params, cfg.x0);
    case ControllerKind::kMpc: {
      SynthesisOutput syn = synthesize_for(cfg);
      return MpcController(std::move(syn.mpc), cfg.model_params);
    }
  }
  throw ConfigError("unknown controller kind");
}

double controller_u_max(const ControllerSpec& spec) {
  switch (spec.kind) {
    case ControllerKind::kCcCv:
    case ControllerKind::kCcCt:
      return spec.pi.out_max;
    case ControllerKind::kDp:
      return spec.dp.u_max;
    case ControllerKind::kMpc:
      return spec.mpc.u_max;
  }
  return 40.0;
}

}  // namespace

void SimConfig::validate() const {
  plant_params.validate();
  model_params.validate();
  if (!(dt_plant > 0.0) || !(dt_control > 0.0)) {
    throw ConfigError("simulation time steps must be positive");
  }
  const double ratio = dt_control / dt_plant;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("dt_plant must divide dt_control");
  }
  if (!(soe_stop >= 0.0)) throw ConfigError("soe_stop must be nonnegative");
  if (!(t_max_sim > 0.0)) throw ConfigError("t_max_sim must be positive");
  kalman.validate();
}

SimResult run_closed_loop(const SimConfig& cfg) {
  cfg.validate();

  SimResult result;
  result.method = cfg.controller.name;

  std::mt19937_64 rng(cfg.noise_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma_ts =
      cfg.measurement_noise ? std::sqrt(cfg.kalman.measurement_cov(0, 0)) : 0.0;
  const double sigma_v =
      cfg.measurement_noise ? std::sqrt(cfg.kalman.measurement_cov(1, 1)) : 0.0;

  const double u_cap = controller_u_max(cfg.controller);

  try {
    ControllerVariant controller = make_controller(cfg);

    BatteryState plant = cfg.x0;
    EstimatorState est =
        make_estimator(cfg.x0, cfg.kalman, cfg.model_params, cfg.dt_control);
    EnergyAccount account;

    double u_prev = 0.0;
    double v_meas_prev = 0.0;
    bool have_prev_meas = false;
    result.max_tc_true = plant.t_c;

    const long max_steps =
        static_cast<long>(std::ceil(cfg.t_max_sim / cfg.dt_control)) + 1;
    result.end = SimEnd::kTimeout;

    for (long k = 0; k < max_steps; ++k) {
      const double t = k * cfg.dt_control;

      // Measure with the current still held at u_prev.
      const double v_true = terminal_voltage(plant, u_prev, cfg.plant_params);
      const Vec2 z(plant.t_s + sigma_ts * gauss(rng),
                   v_true + sigma_v * gauss(rng));

      est = kf_update(est, z, u_prev, cfg.kalman, cfg.model_params);

      // Rectangle-rule SoE from the previous instant's measurement and input.
      if (have_prev_meas) {
        account = soe_tracker_step(account, v_meas_prev, u_prev, cfg.dt_control,
                                   cfg.model_params);
      }
      v_meas_prev = z[1];
      have_prev_meas = true;

      if (account.soe <= cfg.soe_stop) {
        result.end = SimEnd::kDischarged;
        result.discharge_time = t;
        break;
      }
      if (t >= cfg.t_max_sim) {
        result.end = SimEnd::kTimeout;
        result.discharge_time = t;
        break;
      }

      const ControllerInputs inputs{t, z[1], est.x_hat, account.soe, u_prev};
      ControllerCommand cmd = std::visit(
          [&](auto& c) { return c.step(inputs, cfg.dt_control); }, controller);
      const double u = std::clamp(cmd.current, 0.0, u_cap);

      result.trace.rows.push_back(SimRow{t, u, v_true, plant.soc, account.soe,
                                         plant.t_s, plant.t_c, est.x_hat.t_c,
                                         std::move(cmd.diagnostics)});

      plant = integrate_hold(plant, u, cfg.dt_control, cfg.plant_params,
                             cfg.dt_plant);
      est = kf_predict(est, u, cfg.kalman, cfg.model_params, cfg.dt_control);

      result.max_tc_true = std::max(result.max_tc_true, plant.t_c);
      result.extracted_energy = account.extracted;
      u_prev = u;
    }

    if (auto* mpc = std::get_if<MpcController>(&controller)) {
      result.tube_violations = mpc->tube_violations();
    }
  } catch (const Error& e) {
    result.end = SimEnd::kFault;
    result.fault_message = e.what();
  } catch (const std::invalid_argument& e) {
    result.end = SimEnd::kFault;
    result.fault_message = e.what();
  }
  return result;
}

BenchmarkResult run_benchmark(const std::vector<SimConfig>& cfgs, bool parallel) {
  if (cfgs.empty()) throw ConfigError("run_benchmark: empty configuration list");

  BenchmarkResult out;
  out.runs.resize(cfgs.size(), SimResult{});

  if (parallel && cfgs.size() > 1) {
    std::vector<std::future<SimResult>> futures;
    futures.reserve(cfgs.size());
    for (const SimConfig& cfg : cfgs) {
      futures.push_back(
          std::async(std::launch::async, [&cfg] { return run_closed_loop(cfg); }));
    }
    // Merge strictly in configuration order, never completion order.
    for (std::size_t i = 0; i < futures.size(); ++i) out.runs[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < cfgs.size(); ++i) {
      out.runs[i] = run_closed_loop(cfgs[i]);
    }
  }

  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    const SimResult& run = out.runs[i];
    BenchmarkRow row;
    row.method = run.method;
    row.discharge_time = run.discharge_time;
    row.max_core_temp = run.max_tc_true;
    row.constraint_satisfied = run.max_tc_true <= cfgs[i].t_constraint;
    row.completed = run.end == SimEnd::kDischarged;
    if (run.end == SimEnd::kTimeout) row.note = "timeout";
    if (run.end == SimEnd::kFault) {
      row.note = "fault: " + run.fault_message;
      out.any_failed = true;
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

Polytope identify_disturbance_set(const BatteryParams& plant,
                                  const BatteryParams& model,
                                  const DisturbanceIdConfig& cfg) {
  plant.validate();
  model.validate();
  if (!(cfg.dt > 0.0) || cfg.relinearize_steps < 1) {
    throw ConfigError("disturbance identification: bad dt or relinearize_steps");
  }

  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Profile library: structured sweeps plus seeded piecewise-constant draws.
  using Profile = std::vector<double>;
  std::vector<Profile> profiles;
  const int max_len = 2048;
  auto constant = [&](double amps) { return Profile(max_len, amps); };
  profiles.push_back(constant(40.0));
  profiles.push_back(constant(25.0));
  profiles.push_back(constant(10.0));
  {
    Profile ramp(max_len);
    for (int i = 0; i < max_len; ++i) ramp[i] = 40.0 * i / 200.0;
    for (int i = 0; i < max_len; ++i) ramp[i] = std::min(ramp[i], 40.0);
    profiles.push_back(ramp);
    Profile down(max_len);
    for (int i = 0; i < max_len; ++i) down[i] = std::max(0.0, 40.0 - 0.25 * i);
    profiles.push_back(down);
  }
  for (int p = 0; p < cfg.random_profiles; ++p) {
    Profile prof(max_len);
    double level = 40.0 * u01(rng);
    for (int i = 0; i < max_len; ++i) {
      if (i % 10 == 0) level = 40.0 * u01(rng);
      prof[i] = level;
    }
    profiles.push_back(std::move(prof));
  }

  const Vec4 scale = state_scale();
  Vec4 res_lo = Vec4::Zero();
  Vec4 res_hi = Vec4::Zero();

  for (const Profile& prof : profiles) {
    BatteryState x{1.0, 0.0, model.t_ambient, model.t_ambient};
    LinearModel lin = linearize(x, prof[0], cfg.dt, model);
    for (int k = 0; k < max_len; ++k) {
      const double u = prof[k];
      if (k % cfg.relinearize_steps == 0) {
        lin = linearize(x, u, cfg.dt, model);
      }
      const BatteryState x_next = integrate_hold(x, u, cfg.dt, plant);
      const Vec4 residual =
          scale.cwiseInverse().cwiseProduct(x_next.vec() - lin.predict(x.vec(), u));
      res_lo = res_lo.cwiseMin(residual);
      res_hi = res_hi.cwiseMax(residual);
      x = x_next;
      if (x.soc <= cfg.soc_stop) break;
    }
  }

  // Inflate about the center and widen degenerate coordinates to the floor.
  Vec4 center = 0.5 * (res_lo + res_hi);
  Vec4 half = 0.5 * (res_hi - res_lo) * (1.0 + cfg.inflation);
  for (int j = 0; j < 4; ++j) half[j] = std::max(half[j], cfg.floor);
  return Polytope::box(center - half, center + half);
}

SynthesisOutput synthesize_for(const SimConfig& cfg) {
  const MpcOptions& opts = cfg.controller.mpc;
  const BatteryParams& model = cfg.model_params;

  // Operating point on the temperature ride: the steady current that holds
  // the core at t_max, mid-range SoC, thermal steady state.
  const double q_gain = (model.r_u + model.r_c) * (model.r0 + model.r1);
  const double u_ss =
      std::sqrt(std::max(0.0, (opts.t_max - model.t_ambient) / q_gain));
  const double heat = u_ss * u_ss * (model.r0 + model.r1);
  BatteryState x_op;
  x_op.soc = 0.5;
  x_op.v1 = model.r1 * u_ss;
  x_op.t_c = opts.t_max;
  x_op.t_s = model.t_ambient + heat * model.r_u;

  Polytope w_set = identify_disturbance_set(cfg.plant_params, model, cfg.disturbance);
  LinearModel lin = linearize(x_op, u_ss, opts.dt, model);
  Polytope constraints = make_state_input_constraints(opts.t_max, opts.u_max);
  MpcConfig mpc = synthesize_mpc(lin, constraints, w_set, opts);
  return SynthesisOutput{std::move(w_set), std::move(lin), std::move(mpc)};
}

double calibrate_nominal_energy(const BatteryParams& params, double cc_current,
                                double v_cutoff, double i_cutoff, double dt) {
  BatteryParams p = params;
  p.energy_nominal = 1.0;  // unused here; keep validate() happy
  p.validate();

  BatteryState x{1.0, 0.0, p.t_ambient, p.t_ambient};
  double energy = 0.0;
  bool cv_phase = false;
  const double t_cap = 80.0 * 3600.0;
  for (double t = 0.0; t < t_cap; t += dt) {
    double current;
    if (!cv_phase) {
      current = cc_current;
      if (terminal_voltage(x, current, p) <= v_cutoff) cv_phase = true;
    }
    if (cv_phase) {
      // Ideal CV loop: the current that pins the terminal voltage.
      current = std::clamp(
          (ocv_interpolate(x.soc, p.ocv_curve) - x.v1 - v_cutoff) / p.r0, 0.0,
          cc_current);
      if (current <= i_cutoff) break;
    }
    energy += terminal_voltage(x, current, p) * current * dt;
    x = integrate_hold(x, current, dt, p);
  }
  return energy;
}

}  // namespace celldrain
