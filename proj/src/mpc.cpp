#include "celldrain/mpc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "celldrain/lqr.hpp"

namespace celldrain {

namespace {

constexpr double kInf = 1e30;
constexpr double kTubeTol = 1e-6;

}  // namespace

Polytope make_state_input_constraints(double t_max, double u_max) {
  const Vec4 s = state_scale();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 5);
  Eigen::VectorXd b(3);
  a(0, 3) = 1.0;   // Tc (scaled)
  b[0] = t_max / s[3];
  a(1, 4) = 1.0;   // u <= u_max
  b[1] = u_max;
  a(2, 4) = -1.0;  // u >= 0
  b[2] = 0.0;
  return Polytope(std::move(a), std::move(b));
}

MpcConfig synthesize_mpc(const LinearModel& model, const Polytope& constraints,
                         const Polytope& w_set, const MpcOptions& opts) {
  if (constraints.dim() != 5 || w_set.dim() != 4) {
    throw std::invalid_argument("synthesize_mpc: expected 5-D constraints and 4-D w_set");
  }
  if (opts.horizon < 1) throw std::invalid_argument("synthesize_mpc: horizon must be >= 1");

  const Vec4 s = state_scale();
  const Mat4 s_inv = s.cwiseInverse().asDiagonal();
  const Mat4 a_scaled = s_inv * model.a_matrix * s.asDiagonal().toDenseMatrix();
  const Vec4 b_scaled = s_inv * model.b_matrix;

  const Eigen::MatrixXd k_scaled = design_feedback_gain(
      a_scaled, b_scaled, opts.lqr_state_weights.asDiagonal(),
      Eigen::MatrixXd::Constant(1, 1, opts.lqr_input_weight));
  const Mat4 a_k = a_scaled + b_scaled * k_scaled;

  RpiResult rpi = compute_mrpi(a_k, w_set, opts.epsilon);
  const Polytope k_rpi = linear_map(k_scaled, rpi.set);
  const Polytope tube_cross = cartesian_product(rpi.set, k_rpi);
  Polytope tightened = pontryagin_diff(constraints, tube_cross);

  // Cached margins for the QP (physical units).
  const double tc_margin = support(rpi.set, Vec4(0, 0, 0, 1)) * s[3];
  const double u_hi = opts.u_max - support(k_rpi, Eigen::VectorXd::Constant(1, 1.0));
  const double u_lo = support(k_rpi, Eigen::VectorXd::Constant(1, -1.0));

  MpcConfig cfg{opts.horizon,
                opts.q_diag,
                opts.r_weight,
                (k_scaled * s_inv).row(0),
                std::move(rpi),
                std::move(tightened),
                opts.rate_limit,
                opts.y_target,
                opts.dt,
                opts.t_max,
                opts.u_max,
                opts.t_max - tc_margin,
                u_lo,
                u_hi,
                opts.input_delta_penalty,
                opts.delta_weight};
  return cfg;
}

MpcStepResult mpc_step(const BatteryState& x_est, double soe, const MpcConfig& cfg,
                       const LinearModel& model, const BatteryParams& params,
                       double u_prev, MpcWarmStart* warm) {
  if (!x_est.finite() || !std::isfinite(soe)) {
    throw std::invalid_argument("mpc_step: non-finite inputs");
  }
  const int horizon = cfg.horizon;
  const int nz = 4 + horizon;  // decision: [S^-1 x_nom(0); u_nom(0..N-1)]
  const Vec4 s_diag = state_scale();

  // Affine prediction pieces: x(i) = phi[i] x0 + sum_j gamma[i][j] u_j + acc[i].
  const Mat4& a = model.a_matrix;
  const Vec4& b = model.b_matrix;
  const Vec4 c = model.x_next_op - a * model.x_op.vec() - b * model.u_op;
  std::vector<Mat4> phi(horizon + 1);
  std::vector<Vec4> acc(horizon + 1);
  phi[0] = Mat4::Identity();
  acc[0] = Vec4::Zero();
  for (int i = 1; i <= horizon; ++i) {
    phi[i] = a * phi[i - 1];
    acc[i] = a * acc[i - 1] + c;
  }

  // Core-temperature rows: tc(i) = tc_row(i) . z + tc_const(i).
  std::vector<Eigen::VectorXd> tc_row(horizon + 1);
  std::vector<double> tc_const(horizon + 1);
  for (int i = 1; i <= horizon; ++i) {
    Eigen::VectorXd row = Eigen::VectorXd::Zero(nz);
    row.head<4>() = phi[i].row(3).transpose();
    for (int j = 0; j < i; ++j) {
      row[4 + j] = (phi[i - 1 - j] * b)[3];
    }
    tc_row[i] = std::move(row);
    tc_const[i] = acc[i][3];
  }

  // SoE prediction frozen at the current voltage (Eq.-style rectangle rule).
  const double v_now = terminal_voltage(x_est, u_prev, params);
  const double beta = params.eta * v_now * cfg.dt / params.energy_nominal;

  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(nz, nz);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nz);
  auto add_output_term = [&](double weight, const Eigen::VectorXd& row,
                             double constant, double target) {
    p += 2.0 * weight * row * row.transpose();
    g += -2.0 * weight * (target - constant) * row;
  };
  for (int i = 1; i <= horizon; ++i) {
    // SoE(i) = soe - beta * sum_{j<i} u_j.
    Eigen::VectorXd soe_row = Eigen::VectorXd::Zero(nz);
    for (int j = 0; j < i; ++j) soe_row[4 + j] = -beta;
    add_output_term(cfg.q_diag[0], soe_row, soe, cfg.y_target[0]);
    add_output_term(cfg.q_diag[1], tc_row[i], tc_const[i], cfg.y_target[1]);
  }
  for (int j = 0; j < horizon; ++j) p(4 + j, 4 + j) += 2.0 * cfg.r_weight;
  if (cfg.input_delta_penalty && cfg.delta_weight > 0.0) {
    for (int j = 0; j + 1 < horizon; ++j) {
      Eigen::VectorXd d = Eigen::VectorXd::Zero(nz);
      d[4 + j + 1] = 1.0;
      d[4 + j] = -1.0;
      p += 2.0 * cfg.delta_weight * d * d.transpose();
    }
  }

  // Constraint rows.
  const Eigen::MatrixXd& ra = cfg.rpi.set.a();
  const Eigen::VectorXd& rb = cfg.rpi.set.b();
  const Mat4 s_inv = state_scale().cwiseInverse().asDiagonal();
  const Eigen::MatrixXd ra_phys = ra * s_inv;  // tube rows in physical coords

  const int m_tube = static_cast<int>(ra.rows());
  const int m_total = m_tube + horizon /*tc*/ + horizon /*u box*/ +
                      std::max(0, horizon - 1) /*rate*/;
  Eigen::MatrixXd mat = Eigen::MatrixXd::Zero(m_total, nz);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(m_total, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(m_total, kInf);
  int r = 0;

  // x_est - x_nom(0) in R (scaled): -A_R S^-1 x_nom(0) <= b_R - A_R S^-1 x_est.
  const Eigen::VectorXd tube_rhs = rb - ra_phys * x_est.vec();
  for (int i = 0; i < m_tube; ++i, ++r) {
    mat.row(r).head<4>() = -ra_phys.row(i);
    hi[r] = tube_rhs[i];
  }
  // Tightened core-temperature bound along the nominal trajectory.
  for (int i = 1; i <= horizon; ++i, ++r) {
    mat.row(r) = tc_row[i].transpose();
    hi[r] = cfg.tc_bound - tc_const[i];
  }
  // Tightened input bounds; the first input also ties to the previous
  // nominal input through the rate limit.
  for (int j = 0; j < horizon; ++j, ++r) {
    mat(r, 4 + j) = 1.0;
    lo[r] = cfg.u_lo;
    hi[r] = cfg.u_hi;
    if (j == 0 && warm && warm->valid) {
      lo[r] = std::max(lo[r], warm->u_nom_prev - cfg.rate_limit);
      hi[r] = std::min(hi[r], warm->u_nom_prev + cfg.rate_limit);
    }
  }
  // Nominal rate bound |u(i+1) - u(i)| <= rate_limit.
  for (int j = 0; j + 1 < horizon; ++j, ++r) {
    mat(r, 4 + j + 1) = 1.0;
    mat(r, 4 + j) = -1.0;
    lo[r] = -cfg.rate_limit;
    hi[r] = cfg.rate_limit;
  }

  QpProblem qp{std::move(p), std::move(g), std::move(mat), std::move(lo),
               std::move(hi)};

  // Warm start from the shifted previous solution.
  Eigen::VectorXd z_warm;
  const bool have_warm = warm && warm->valid;
  if (have_warm) {
    z_warm = Eigen::VectorXd::Zero(nz);
    z_warm.head<4>() = warm->x_nominal.col(1);
    for (int j = 0; j < horizon; ++j) {
      const int src = std::min<int>(j + 1, static_cast<int>(warm->u_nominal.size()) - 1);
      z_warm[4 + j] = warm->u_nominal[src];
    }
  }

  QpSettings settings;
  const QpSolution sol =
      qp_solve(qp, settings, have_warm ? &z_warm : nullptr, nullptr);

  MpcStepResult out;
  out.qp_iterations = sol.iterations;

  Eigen::VectorXd u_plan(horizon);
  Vec4 x0_nom;
  if (sol.status == QpSolution::Status::kSolved) {
    x0_nom = sol.x.head<4>();
    u_plan = sol.x.tail(horizon);
  } else if (have_warm) {
    // Pure tube action: reuse the shifted previous nominal plan.
    out.fallback = true;
    x0_nom = warm->x_nominal.col(1);
    for (int j = 0; j < horizon; ++j) {
      const int src = std::min<int>(j + 1, static_cast<int>(warm->u_nominal.size()) - 1);
      u_plan[j] = warm->u_nominal[src];
    }
  } else {
    throw ControllerFaultError(
        "mpc_step: QP iteration cap exceeded with no previous solution",
        "qp_iterations=" + std::to_string(sol.iterations) +
            ";primal_residual=" + std::to_string(sol.primal_residual) +
            ";dual_residual=" + std::to_string(sol.dual_residual));
  }

  const double u_nom0 = u_plan[0];
  const double u_raw =
      u_nom0 + (cfg.k_gain * (x_est.vec() - x0_nom)).value();
  const double u_cmd = std::clamp(u_raw, 0.0, cfg.u_max);

  const Vec4 tube_err = s_inv * (x_est.vec() - x0_nom);
  out.tube_ok = cfg.rpi.set.contains(tube_err, kTubeTol);
  out.u_nominal0 = u_nom0;
  out.x_nominal0 = x0_nom;

  if (warm) {
    warm->valid = true;
    warm->u_nominal = u_plan;
    warm->x_nominal.resize(4, horizon + 1);
    warm->x_nominal.col(0) = x0_nom;
    for (int i = 1; i <= horizon; ++i) {
      warm->x_nominal.col(i) =
          phi[1] * warm->x_nominal.col(i - 1) + b * u_plan[i - 1] + c;
    }
    warm->u_nom_prev = u_nom0;
  }

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "unom=%.4f;uk=%.4f;qp_iters=%d;fallback=%d;tube_ok=%d;tc_bound=%.3f",
                u_nom0, u_cmd, sol.iterations, out.fallback ? 1 : 0,
                out.tube_ok ? 1 : 0, cfg.tc_bound);
  out.command = ControllerCommand{u_cmd, buf};
  return out;
}

MpcController::MpcController(MpcConfig cfg, BatteryParams model_params)
    : cfg_(std::move(cfg)), params_(std::move(model_params)) {}

ControllerCommand MpcController::step(const ControllerInputs& in, double dt) {
  (void)dt;  // the QP runs at the synthesis sampling time
  const LinearModel model = linearize(in.x_est, in.u_prev, cfg_.dt, params_);
  const MpcStepResult res =
      mpc_step(in.x_est, in.soe, cfg_, model, params_, in.u_prev, &warm_);
  if (!res.tube_ok) ++tube_violations_;
  return res.command;
}

}  // namespace celldrain
