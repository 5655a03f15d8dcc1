#pragma once

#include <vector>

#include "celldrain/battery.hpp"
#include "celldrain/controllers.hpp"

// Offline dynamic-programming discharge planner. Value iteration runs on a
// reduced two-state model over a (SoC, Tc) grid: the RC voltage is taken at
// its per-action steady value V1 = R1*u and the surface temperature at its
// thermal steady state given Tc. The state of energy is tracked through a
// static SoC -> SoE proxy calibrated from the OCV curve, the nominal energy
// and a resistive-loss correction at a reference current.
//
// Cost structure, per trajectory: every step before the SoE proxy crosses
// zero costs 1 + w2*u; reaching the depleted region terminates with an
// overshoot penalty w1*|SoE|. Trajectories that cannot complete within the
// iteration horizon keep the bound w3*N + w4*u_max*N they are initialized
// with (the incomplete-trajectory branch of the cost).
namespace celldrain {

struct DpConfig {
  double w1 = 1e5;
  double w2 = 1e-5;
  double w3 = 10.0;
  double w4 = 1e-5;
  double t_max = 40.0;  // degC
  double u_max = 40.0;  // A
  double dt = 20.0;     // s
  std::vector<double> soc_grid;  // strictly increasing
  std::vector<double> tc_grid;   // strictly increasing
  std::vector<double> u_grid;    // strictly increasing, within [0, u_max]
  double loss_reference_current = 25.0;  // A, for the SoE proxy
  int max_sweeps = 5000;
  double convergence_tol = 1e-9;

  void validate() const;
  static DpConfig defaults();  // 51 x 41 x 21 grids
};

class DpSolver {
 public:
  // Runs value iteration to convergence (or exactly `sweeps` Gauss-Seidel
  // sweeps when sweeps >= 0; used by the finite-horizon oracle tests).
  DpSolver(const DpConfig& cfg, const BatteryParams& params, int sweeps = -1);

  // Bilinear interpolation of the converged value function.
  double value(double soc, double tc) const;

  // SoE proxy used for the depleted-region test.
  double soe_proxy(double soc) const;
  bool depleted(double soc) const { return soe_proxy(soc) <= 0.0; }

  // Reduced-model step (soc, tc, u) -> (soc', tc'), one RK4 step of dt.
  void reduced_step(double soc, double tc, double u, double* soc_next,
                    double* tc_next) const;

  // Greedy forward rollout from x0; throws if x0 lies outside the grid hull
  // or no feasible action exists at some visited node.
  std::vector<double> rollout(const BatteryState& x0) const;

  const DpConfig& config() const { return cfg_; }
  int sweeps_used() const { return sweeps_used_; }

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * tc_n_ + j; }

  DpConfig cfg_;
  BatteryParams params_;
  int soc_n_ = 0;
  int tc_n_ = 0;
  std::vector<double> value_;
  int sweeps_used_ = 0;
};

// Solves problem-(10)-style optimal discharge from x0 and returns the
// open-loop current sequence (greedy rollout of the converged value).
std::vector<double> dp_solve(const BatteryState& x0, const DpConfig& cfg,
                             const BatteryParams& params);

// Wraps a precomputed plan as a controller: plays the sequence, holding the
// last value once exhausted (termination is the harness's job).
class DpController {
 public:
  DpController(const DpConfig& cfg, const BatteryParams& model_params,
               const BatteryState& x0);

  ControllerCommand step(const ControllerInputs& in, double dt);

 private:
  std::vector<double> plan_;
  std::size_t k_ = 0;
  double u_max_;
};

}  // namespace celldrain
