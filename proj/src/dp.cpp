#include "celldrain/dp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace celldrain {

namespace {

void check_grid(const std::vector<double>& g, const char* name) {
  if (g.size() < 2) throw ConfigError(std::string("dp grid ") + name + " needs >= 2 nodes");
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i] > g[i - 1])) {
      throw ConfigError(std::string("dp grid ") + name + " must be strictly increasing");
    }
  }
}

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

// Locates x in grid g, returning the left node index and the fraction.
void locate(const std::vector<double>& g, double x, int* i0, double* frac) {
  const int n = static_cast<int>(g.size());
  if (x <= g.front()) {
    *i0 = 0;
    *frac = 0.0;
    return;
  }
  if (x >= g.back()) {
    *i0 = n - 2;
    *frac = 1.0;
    return;
  }
  const auto it = std::upper_bound(g.begin(), g.end(), x);
  *i0 = static_cast<int>(it - g.begin()) - 1;
  *frac = (x - g[*i0]) / (g[*i0 + 1] - g[*i0]);
}

}  // namespace

void DpConfig::validate() const {
  check_grid(soc_grid, "soc_grid");
  check_grid(tc_grid, "tc_grid");
  check_grid(u_grid, "u_grid");
  if (!(dt > 0.0)) throw ConfigError("dp dt must be positive");
  if (!(u_max > 0.0)) throw ConfigError("dp u_max must be positive");
  for (double u : u_grid) {
    if (u < 0.0 || u > u_max + 1e-12) {
      throw ConfigError("dp u_grid must lie within [0, u_max]");
    }
  }
}

DpConfig DpConfig::defaults() {
  DpConfig cfg;
  cfg.soc_grid = linspace(0.0, 1.0, 51);
  cfg.tc_grid = linspace(15.0, 55.0, 41);
  cfg.u_grid = linspace(0.0, 40.0, 21);
  return cfg;
}

DpSolver::DpSolver(const DpConfig& cfg, const BatteryParams& params, int sweeps)
    : cfg_(cfg), params_(params) {
  cfg_.validate();
  params_.validate();
  soc_n_ = static_cast<int>(cfg_.soc_grid.size());
  tc_n_ = static_cast<int>(cfg_.tc_grid.size());

  // Per-(node, action) transition cache: successor, stage cost, and the
  // terminal overshoot kick when the successor is depleted.
  const int u_n = static_cast<int>(cfg_.u_grid.size());
  struct Edge {
    double soc_next, tc_next;
    double stage;          // 1 + w2*u
    double terminal_cost;  // w1*|SoE(next)| when depleted_next
    bool feasible;
    bool depleted_next;
  };
  std::vector<Edge> edges(static_cast<std::size_t>(soc_n_) * tc_n_ * u_n);
  for (int i = 0; i < soc_n_; ++i) {
    for (int j = 0; j < tc_n_; ++j) {
      for (int a = 0; a < u_n; ++a) {
        const double u = cfg_.u_grid[a];
        double sn, tn;
        reduced_step(cfg_.soc_grid[i], cfg_.tc_grid[j], u, &sn, &tn);
        Edge& e = edges[(idx(i, j)) * u_n + a];
        e.soc_next = sn;
        e.tc_next = tn;
        e.stage = 1.0 + cfg_.w2 * u;
        e.feasible = tn <= cfg_.t_max + 1e-12;
        e.depleted_next = depleted(sn);
        e.terminal_cost = e.depleted_next ? cfg_.w1 * std::abs(soe_proxy(sn)) : 0.0;
      }
    }
  }

  // Value iteration, initialized at the incomplete-trajectory bound
  // w3*N + w4*u_max*N; depleted nodes are terminal with w1*|SoE|.
  const double horizon = static_cast<double>(cfg_.max_sweeps);
  const double incomplete_bound = cfg_.w3 * horizon + cfg_.w4 * cfg_.u_max * horizon;
  value_.assign(static_cast<std::size_t>(soc_n_) * tc_n_, incomplete_bound);
  std::vector<bool> terminal(value_.size(), false);
  for (int i = 0; i < soc_n_; ++i) {
    const bool dep = depleted(cfg_.soc_grid[i]);
    for (int j = 0; j < tc_n_; ++j) {
      if (dep) {
        terminal[idx(i, j)] = true;
        value_[idx(i, j)] = cfg_.w1 * std::abs(soe_proxy(cfg_.soc_grid[i]));
      }
    }
  }

  // Synchronous (Jacobi) sweeps: a run with `sweeps` = k is exactly the
  // k-step Bellman recursion, which the enumeration oracle reproduces.
  const int max_sweeps = sweeps >= 0 ? sweeps : cfg_.max_sweeps;
  std::vector<double> next(value_.size());
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (int i = 0; i < soc_n_; ++i) {
      for (int j = 0; j < tc_n_; ++j) {
        if (terminal[idx(i, j)]) {
          next[idx(i, j)] = value_[idx(i, j)];
          continue;
        }
        double best = incomplete_bound;
        for (int a = u_n - 1; a >= 0; --a) {  // prefer larger current on ties
          const Edge& e = edges[idx(i, j) * u_n + a];
          if (!e.feasible) continue;
          const double tail = e.depleted_next ? e.terminal_cost
                                              : value(e.soc_next, e.tc_next);
          const double cand = e.stage + tail;
          if (cand < best - 1e-15) best = cand;
        }
        next[idx(i, j)] = best;
        max_change = std::max(max_change, std::abs(best - value_[idx(i, j)]));
      }
    }
    value_.swap(next);
    sweeps_used_ = sweep + 1;
    if (sweeps < 0 && max_change < cfg_.convergence_tol) break;
  }
}

double DpSolver::soe_proxy(double soc) const {
  // Remaining terminal energy at a given SoC: chemical energy below the
  // operating point minus the resistive loss of draining it at the
  // reference current, normalized by the nominal energy.
  const auto& curve = params_.ocv_curve;
  const double as = 3600.0 * params_.capacity_nominal;

  // Integral of the OCV interpolant from 0 to soc (piecewise linear).
  double chem = 0.0;
  double prev_s = 0.0;
  double prev_v = ocv_interpolate(0.0, curve);
  for (std::size_t k = 0; k < curve.soc.size() && prev_s < soc; ++k) {
    const double s = std::min(curve.soc[k], soc);
    if (s <= prev_s) continue;
    const double v = ocv_interpolate(s, curve);
    chem += 0.5 * (prev_v + v) * (s - prev_s);
    prev_s = s;
    prev_v = v;
  }
  if (soc > prev_s) {
    const double v = ocv_interpolate(soc, curve);
    chem += 0.5 * (prev_v + v) * (soc - prev_s);
  }
  chem *= as;

  const double loss = cfg_.loss_reference_current * (params_.r0 + params_.r1) *
                      as * soc;
  const double extractable_full = [&] {
    double full = 0.0;
    double ps = curve.soc.front(), pv = curve.voltage.front();
    for (std::size_t k = 1; k < curve.soc.size(); ++k) {
      full += 0.5 * (pv + curve.voltage[k]) * (curve.soc[k] - ps);
      ps = curve.soc[k];
      pv = curve.voltage[k];
    }
    full += curve.voltage.front() * curve.soc.front();  // clamp region
    return full * as -
           cfg_.loss_reference_current * (params_.r0 + params_.r1) * as;
  }();

  // SoE = 1 - Eo/En with Eo = extractable(full) - extractable(soc).
  return 1.0 - (extractable_full - (chem - loss)) / params_.energy_nominal;
}

void DpSolver::reduced_step(double soc, double tc, double u, double* soc_next,
                            double* tc_next) const {
  const double v1 = params_.r1 * u;  // quasi-static RC pair
  auto deriv = [&](double tc_now, double* dsoc, double* dtc) {
    const double ts_qs = (params_.r_c * params_.t_ambient + params_.r_u * tc_now) /
                         (params_.r_u + params_.r_c);
    *dsoc = -u / (3600.0 * params_.capacity_nominal);
    *dtc = (ts_qs - tc_now) / (params_.r_c * params_.c_c) +
           u * (v1 + params_.r0 * u) / params_.c_c;
  };
  // RK4 on (soc, tc); SoC dynamics are exact (state-independent).
  double d1s, d1t, d2s, d2t, d3s, d3t, d4s, d4t;
  const double h = cfg_.dt;
  deriv(tc, &d1s, &d1t);
  deriv(tc + 0.5 * h * d1t, &d2s, &d2t);
  deriv(tc + 0.5 * h * d2t, &d3s, &d3t);
  deriv(tc + h * d3t, &d4s, &d4t);
  *soc_next = std::max(0.0, soc + h * d1s);
  *tc_next = tc + (h / 6.0) * (d1t + 2.0 * d2t + 2.0 * d3t + d4t);
}

double DpSolver::value(double soc, double tc) const {
  int i0, j0;
  double fs, ft;
  locate(cfg_.soc_grid, soc, &i0, &fs);
  locate(cfg_.tc_grid, tc, &j0, &ft);
  const double v00 = value_[idx(i0, j0)];
  const double v01 = value_[idx(i0, j0 + 1)];
  const double v10 = value_[idx(i0 + 1, j0)];
  const double v11 = value_[idx(i0 + 1, j0 + 1)];
  return (1 - fs) * ((1 - ft) * v00 + ft * v01) + fs * ((1 - ft) * v10 + ft * v11);
}

std::vector<double> DpSolver::rollout(const BatteryState& x0) const {
  if (x0.soc < cfg_.soc_grid.front() - 1e-9 || x0.soc > cfg_.soc_grid.back() + 1e-9 ||
      x0.t_c < cfg_.tc_grid.front() - 1e-9 || x0.t_c > cfg_.tc_grid.back() + 1e-9) {
    throw std::invalid_argument("dp rollout: initial state outside the grid hull");
  }

  std::vector<double> plan;
  double soc = x0.soc;
  double tc = x0.t_c;
  const std::size_t step_cap = static_cast<std::size_t>(cfg_.max_sweeps) * 4;
  while (!depleted(soc)) {
    double best_cost = std::numeric_limits<double>::infinity();
    double best_u = -1.0;
    double best_soc = soc, best_tc = tc;
    for (int a = static_cast<int>(cfg_.u_grid.size()) - 1; a >= 0; --a) {
      const double u = cfg_.u_grid[a];
      double sn, tn;
      reduced_step(soc, tc, u, &sn, &tn);
      if (tn > cfg_.t_max + 1e-12) continue;
      const double tail = depleted(sn) ? cfg_.w1 * std::abs(soe_proxy(sn)) : value(sn, tn);
      const double cand = 1.0 + cfg_.w2 * u + tail;
      if (cand < best_cost - 1e-15) {
        best_cost = cand;
        best_u = u;
        best_soc = sn;
        best_tc = tn;
      }
    }
    if (best_u < 0.0) {
      char buf[96];
      std::snprintf(buf, sizeof(buf),
                    "dp rollout: no feasible action at (soc=%.4f, tc=%.2f)", soc, tc);
      throw Error(buf);
    }
    plan.push_back(best_u);
    soc = best_soc;
    tc = best_tc;
    if (plan.size() > step_cap) {
      throw ConvergenceError("dp rollout: plan exceeded step cap");
    }
  }
  return plan;
}

std::vector<double> dp_solve(const BatteryState& x0, const DpConfig& cfg,
                             const BatteryParams& params) {
  return DpSolver(cfg, params).rollout(x0);
}

DpController::DpController(const DpConfig& cfg, const BatteryParams& model_params,
                           const BatteryState& x0)
    : plan_(dp_solve(x0, cfg, model_params)), u_max_(cfg.u_max) {}

ControllerCommand DpController::step(const ControllerInputs& in, double dt) {
  (void)in;
  (void)dt;
  double u;
  const char* tag;
  if (plan_.empty()) {
    u = 0.0;
    tag = "empty";
  } else if (k_ < plan_.size()) {
    u = plan_[k_];
    tag = "plan";
  } else {
    u = plan_.back();  // hold the final current until the harness terminates
    tag = "tail_hold";
  }
  ++k_;
  char buf[96];
  std::snprintf(buf, sizeof(buf), "mode=%s;k=%zu;u=%.6g", tag, k_ - 1, u);
  return {std::clamp(u, 0.0, u_max_), buf};
}

}  // namespace celldrain
