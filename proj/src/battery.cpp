#include "celldrain/battery.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

namespace celldrain {

namespace {

bool all_finite(const Vec4& v) { return v.allFinite(); }

void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) {
    throw std::invalid_argument(std::string(name) + " is not finite");
  }
}

}  // namespace

void OcvCurve::validate() const {
  if (soc.empty() || soc.size() != voltage.size()) {
    throw ConfigError("OCV curve must be a nonempty list of (soc, voltage) pairs");
  }
  for (std::size_t i = 0; i < soc.size(); ++i) {
    if (!std::isfinite(soc[i]) || !std::isfinite(voltage[i])) {
      throw ConfigError("OCV curve contains a non-finite entry");
    }
    if (soc[i] < 0.0 || soc[i] > 1.0) {
      throw ConfigError("OCV breakpoints must lie in [0, 1]");
    }
    if (i > 0 && soc[i] <= soc[i - 1]) {
      throw ConfigError("OCV breakpoints must be strictly increasing");
    }
    if (i > 0 && voltage[i] <= voltage[i - 1]) {
      throw ConfigError("OCV voltages must be strictly increasing");
    }
  }
}

void BatteryParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("battery parameter ") + name +
                        " must be strictly positive");
    }
  };
  positive(capacity_nominal, "capacity_nominal");
  positive(r0, "r0");
  positive(r1, "r1");
  positive(c1, "c1");
  positive(r_u, "r_u");
  positive(r_c, "r_c");
  positive(c_s, "c_s");
  positive(c_c, "c_c");
  if (!std::isfinite(t_ambient)) throw ConfigError("t_ambient must be finite");
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("eta must lie in (0, 1]");
  if (!(energy_nominal >= 0.0) || !std::isfinite(energy_nominal)) {
    throw ConfigError("energy_nominal must be nonnegative");
  }
  ocv_curve.validate();
}

bool BatteryState::finite() const { return vec().allFinite(); }

BatteryParams default_params() {
  BatteryParams p;
  // Generic NMC-shaped curve: steep below SoC 0.1, plateau mid-range.
  p.ocv_curve.soc = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  p.ocv_curve.voltage = {3.00, 3.40, 3.55, 3.62, 3.67, 3.71,
                         3.76, 3.82, 3.90, 4.03, 4.20};
  // Calibrated once by the 1C CC-CV reference discharge (docs/config.md).
  p.energy_nominal = 4.28869e5;
  return p;
}

double ocv_interpolate(double soc, const OcvCurve& curve) {
  if (curve.soc.empty()) throw ConfigError("OCV curve is empty");
  const auto& s = curve.soc;
  const auto& v = curve.voltage;
  if (soc <= s.front()) return v.front();
  if (soc >= s.back()) return v.back();
  const auto it = std::upper_bound(s.begin(), s.end(), soc);
  const std::size_t k = static_cast<std::size_t>(it - s.begin());
  const double t = (soc - s[k - 1]) / (s[k] - s[k - 1]);
  return v[k - 1] + t * (v[k] - v[k - 1]);
}

double ocv_slope(double soc, const OcvCurve& curve) {
  if (curve.soc.empty()) throw ConfigError("OCV curve is empty");
  const auto& s = curve.soc;
  const auto& v = curve.voltage;
  if (soc < s.front() || soc > s.back()) return 0.0;
  auto it = std::upper_bound(s.begin(), s.end(), soc);
  std::size_t k = static_cast<std::size_t>(it - s.begin());
  if (k == s.size()) k = s.size() - 1;  // right endpoint: use last segment
  if (k == 0) k = 1;
  return (v[k] - v[k - 1]) / (s[k] - s[k - 1]);
}

Vec4 state_derivative(const BatteryState& state, double current,
                      const BatteryParams& params) {
  require_finite(current, "current");
  if (!state.finite()) throw std::invalid_argument("battery state is not finite");

  const double as_capacity = 3600.0 * params.capacity_nominal;
  Vec4 dx;
  dx[0] = -current / as_capacity;
  dx[1] = -state.v1 / (params.r1 * params.c1) + current / params.c1;
  dx[2] = (params.t_ambient - state.t_s) / (params.r_u * params.c_s) -
          (state.t_s - state.t_c) / (params.r_c * params.c_s);
  dx[3] = (state.t_s - state.t_c) / (params.r_c * params.c_c) +
          current * (state.v1 + params.r0 * current) / params.c_c;
  return dx;
}

double terminal_voltage(const BatteryState& state, double current,
                        const BatteryParams& params) {
  require_finite(current, "current");
  if (!state.finite()) throw std::invalid_argument("battery state is not finite");
  return ocv_interpolate(state.soc, params.ocv_curve) - state.v1 -
         params.r0 * current;
}

BatteryState integrate_step(const BatteryState& state, double current, double dt,
                            const BatteryParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");

  const Vec4 x0 = state.vec();
  const Vec4 k1 = state_derivative(state, current, params);
  const Vec4 k2 =
      state_derivative(BatteryState::from_vec(x0 + 0.5 * dt * k1), current, params);
  const Vec4 k3 =
      state_derivative(BatteryState::from_vec(x0 + 0.5 * dt * k2), current, params);
  const Vec4 k4 =
      state_derivative(BatteryState::from_vec(x0 + dt * k3), current, params);

  Vec4 x1 = x0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!all_finite(x1)) {
    throw NumericalBlowupError("integration step produced a non-finite state", x1);
  }
  x1[0] = std::clamp(x1[0], 0.0, 1.0);
  return BatteryState::from_vec(x1);
}

BatteryState integrate_hold(const BatteryState& state, double current, double dt,
                            const BatteryParams& params, double dt_sub) {
  if (!(dt > 0.0) || !(dt_sub > 0.0)) {
    throw std::invalid_argument("dt and dt_sub must be positive");
  }
  const int n = std::max(1, static_cast<int>(std::ceil(dt / dt_sub - 1e-12)));
  const double h = dt / n;
  BatteryState x = state;
  for (int i = 0; i < n; ++i) x = integrate_step(x, current, h, params);
  return x;
}

void continuous_jacobians(const BatteryState& state, double current,
                          const BatteryParams& params, Mat4* df_dx, Vec4* df_du) {
  require_finite(current, "current");
  Mat4& a = *df_dx;
  Vec4& b = *df_du;
  a.setZero();
  b.setZero();

  // Row 0: SoC dynamics are state-independent.
  b[0] = -1.0 / (3600.0 * params.capacity_nominal);
  // Row 1: RC pair.
  a(1, 1) = -1.0 / (params.r1 * params.c1);
  b[1] = 1.0 / params.c1;
  // Row 2: surface temperature.
  a(2, 2) = -1.0 / (params.r_u * params.c_s) - 1.0 / (params.r_c * params.c_s);
  a(2, 3) = 1.0 / (params.r_c * params.c_s);
  // Row 3: core temperature with heat source I*(V1 + R0*I).
  a(3, 1) = current / params.c_c;
  a(3, 2) = 1.0 / (params.r_c * params.c_c);
  a(3, 3) = -1.0 / (params.r_c * params.c_c);
  b[3] = (state.v1 + 2.0 * params.r0 * current) / params.c_c;
}

LinearModel linearize(const BatteryState& state, double current, double dt,
                      const BatteryParams& params, Discretization method) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");

  Mat4 jx;
  Vec4 ju;
  continuous_jacobians(state, current, params, &jx, &ju);

  LinearModel m;
  m.x_op = state;
  m.u_op = current;
  m.dt = dt;
  if (method == Discretization::kEuler) {
    m.a_matrix = Mat4::Identity() + dt * jx;
    m.b_matrix = dt * ju;
  } else {
    // Zero-order-hold discretization via the augmented matrix exponential
    // exp([Jx Ju; 0 0] dt) = [Ad Bd; 0 1].
    Eigen::Matrix<double, 5, 5> aug = Eigen::Matrix<double, 5, 5>::Zero();
    aug.topLeftCorner<4, 4>() = jx * dt;
    aug.topRightCorner<4, 1>() = ju * dt;
    const Eigen::Matrix<double, 5, 5> exp_aug = aug.exp();
    m.a_matrix = exp_aug.topLeftCorner<4, 4>();
    m.b_matrix = exp_aug.topRightCorner<4, 1>();
  }
  m.x_next_op = integrate_hold(state, current, dt, params).vec();
  return m;
}

EnergyAccount soe_step(const EnergyAccount& account, double v_prev, double i_prev,
                       double dt, const BatteryParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  require_finite(v_prev, "v_prev");
  require_finite(i_prev, "i_prev");

  const double increment = params.eta * v_prev * i_prev * dt;
  EnergyAccount out;
  out.extracted = account.extracted + increment;
  out.soe = account.soe - increment / params.energy_nominal;
  return out;
}

void PerturbationSpec::validate() const {
  for (double p : {capacity, r0, r1, c1, r_u, r_c, c_s, c_c, ocv}) {
    if (!(p >= 0.0 && p <= 0.5)) {
      throw std::invalid_argument("perturbation magnitudes must lie in [0, 0.5]");
    }
  }
}

BatteryParams make_perturbed_plant(const BatteryParams& params,
                                   const PerturbationSpec& perturbation,
                                   std::uint64_t seed) {
  perturbation.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  // One draw per constant in a fixed order, so scaling the magnitudes keeps
  // the realization direction and the outputs reproducible per seed.
  auto scaled = [&](double value, double p) { return value * (1.0 + p * unit(rng)); };

  BatteryParams out = params;
  out.capacity_nominal = scaled(params.capacity_nominal, perturbation.capacity);
  out.r0 = scaled(params.r0, perturbation.r0);
  out.r1 = scaled(params.r1, perturbation.r1);
  out.c1 = scaled(params.c1, perturbation.c1);
  out.r_u = scaled(params.r_u, perturbation.r_u);
  out.r_c = scaled(params.r_c, perturbation.r_c);
  out.c_s = scaled(params.c_s, perturbation.c_s);
  out.c_c = scaled(params.c_c, perturbation.c_c);

  // Smooth bounded OCV offset, |offset| <= p * 100 mV. The two low-frequency
  // modes keep the slope well below the minimum curve slope, so the
  // perturbed table stays strictly monotone.
  const double c1m = unit(rng);
  const double c2m = unit(rng);
  const double norm = std::abs(c1m) + std::abs(c2m);
  if (perturbation.ocv > 0.0 && norm > 0.0) {
    const double amp = perturbation.ocv * 0.1;
    for (std::size_t i = 0; i < out.ocv_curve.soc.size(); ++i) {
      const double s = out.ocv_curve.soc[i];
      const double offset =
          amp * (c1m * std::sin(M_PI * s) + c2m * std::sin(2.0 * M_PI * s)) / norm;
      out.ocv_curve.voltage[i] += offset;
    }
  }
  out.validate();
  return out;
}

}  // namespace celldrain
