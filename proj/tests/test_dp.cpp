#include "celldrain/dp.hpp"

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

using namespace celldrain;

namespace {

BatteryParams params() { return default_params(); }

std::vector<double> nodes(double lo, double hi, int n) {
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1);
  return v;
}

// Independent bilinear interpolation for the enumeration oracle.
double interp2(const std::vector<double>& gs, const std::vector<double>& gt,
               const std::vector<std::vector<double>>& v, double s, double t) {
  auto locate = [](const std::vector<double>& g, double x, int* i, double* f) {
    if (x <= g.front()) {
      *i = 0;
      *f = 0.0;
      return;
    }
    if (x >= g.back()) {
      *i = static_cast<int>(g.size()) - 2;
      *f = 1.0;
      return;
    }
    int k = 0;
    while (g[k + 1] < x) ++k;
    *i = k;
    *f = (x - g[k]) / (g[k + 1] - g[k]);
  };
  int i, j;
  double fi, fj;
  locate(gs, s, &i, &fi);
  locate(gt, t, &j, &fj);
  return (1 - fi) * ((1 - fj) * v[i][j] + fj * v[i][j + 1]) +
         fi * ((1 - fj) * v[i + 1][j] + fj * v[i + 1][j + 1]);
}

}  // namespace

TEST(DpConfig, ValidationCatchesBadGrids) {
  DpConfig cfg = DpConfig::defaults();
  cfg.soc_grid = {0.5};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DpConfig::defaults();
  cfg.u_grid = {0.0, 50.0};  // beyond u_max
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg = DpConfig::defaults();
  cfg.tc_grid[3] = cfg.tc_grid[2];
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(DpSolver, TimeOnlyCostGivesBangDischarge) {
  DpConfig cfg;
  cfg.w1 = 0.0;
  cfg.w2 = 0.0;
  cfg.w4 = 0.0;
  cfg.t_max = 1e9;  // unconstrained
  cfg.u_max = 40.0;
  cfg.dt = 20.0;
  cfg.soc_grid = nodes(0.0, 1.0, 21);
  cfg.tc_grid = nodes(15.0, 55.0, 5);
  cfg.u_grid = nodes(0.0, 40.0, 5);

  const std::vector<double> plan =
      dp_solve(BatteryState{1.0, 0.0, 20.0, 20.0}, cfg, params());
  ASSERT_FALSE(plan.empty());
  for (double u : plan) EXPECT_DOUBLE_EQ(u, 40.0);
}

TEST(DpSolver, TwoStepValueMatchesExhaustiveEnumeration) {
  DpConfig cfg;
  cfg.t_max = 40.0;
  cfg.u_max = 40.0;
  cfg.dt = 20.0;
  cfg.soc_grid = nodes(0.0, 1.0, 3);
  cfg.tc_grid = nodes(20.0, 40.0, 3);
  cfg.u_grid = nodes(0.0, 40.0, 3);
  cfg.max_sweeps = 50;  // the incomplete-trajectory bound uses this horizon

  const BatteryParams p = params();
  const DpSolver solver(cfg, p, 2);

  // Exhaustive enumeration of the same two-step Bellman recursion, written
  // independently: own interpolation, own sweep structure.
  const int ns = 3, nt = 3;
  const double bound = cfg.w3 * cfg.max_sweeps + cfg.w4 * cfg.u_max * cfg.max_sweeps;
  std::vector<std::vector<double>> v(ns, std::vector<double>(nt));
  std::vector<std::vector<bool>> terminal(ns, std::vector<bool>(nt));
  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      const bool dep = solver.depleted(cfg.soc_grid[i]);
      terminal[i][j] = dep;
      v[i][j] = dep ? cfg.w1 * std::abs(solver.soe_proxy(cfg.soc_grid[i])) : bound;
    }
  }
  for (int sweep = 0; sweep < 2; ++sweep) {
    auto v_next = v;
    for (int i = 0; i < ns; ++i) {
      for (int j = 0; j < nt; ++j) {
        if (terminal[i][j]) continue;
        double best = bound;
        for (double u : cfg.u_grid) {
          double sn, tn;
          solver.reduced_step(cfg.soc_grid[i], cfg.tc_grid[j], u, &sn, &tn);
          if (tn > cfg.t_max + 1e-12) continue;
          const double tail = solver.depleted(sn)
                                  ? cfg.w1 * std::abs(solver.soe_proxy(sn))
                                  : interp2(cfg.soc_grid, cfg.tc_grid, v, sn, tn);
          best = std::min(best, 1.0 + cfg.w2 * u + tail);
        }
        v_next[i][j] = best;
      }
    }
    v = v_next;
  }

  for (int i = 0; i < ns; ++i) {
    for (int j = 0; j < nt; ++j) {
      EXPECT_NEAR(solver.value(cfg.soc_grid[i], cfg.tc_grid[j]), v[i][j], 1e-12)
          << "node (" << i << "," << j << ")";
    }
  }
}

TEST(DpSolver, RelaxingTemperatureBoundNeverIncreasesCost) {
  DpConfig tight;
  tight.t_max = 38.0;
  tight.dt = 20.0;
  tight.soc_grid = nodes(0.0, 1.0, 11);
  tight.tc_grid = nodes(15.0, 45.0, 7);
  tight.u_grid = nodes(0.0, 40.0, 5);
  DpConfig loose = tight;
  loose.t_max = 42.0;

  const BatteryParams p = params();
  const DpSolver vt(tight, p);
  const DpSolver vl(loose, p);
  for (double soc : tight.soc_grid) {
    for (double tc : tight.tc_grid) {
      EXPECT_LE(vl.value(soc, tc), vt.value(soc, tc) + 1e-9);
    }
  }
}

TEST(DpSolver, RolloutRespectsBoundsAndTerminates) {
  DpConfig cfg = DpConfig::defaults();
  cfg.soc_grid = nodes(0.0, 1.0, 26);
  cfg.tc_grid = nodes(15.0, 55.0, 21);
  cfg.u_grid = nodes(0.0, 40.0, 11);

  const BatteryParams p = params();
  const DpSolver solver(cfg, p);
  const std::vector<double> plan = solver.rollout(BatteryState{1.0, 0.0, 20.0, 20.0});
  ASSERT_FALSE(plan.empty());

  double soc = 1.0, tc = 20.0;
  for (double u : plan) {
    EXPECT_GE(u, 0.0);
    EXPECT_LE(u, cfg.u_max);
    solver.reduced_step(soc, tc, u, &soc, &tc);
    EXPECT_LE(tc, cfg.t_max + 1e-9);
  }
  EXPECT_TRUE(solver.depleted(soc));
}

TEST(DpSolver, InitialStateOutsideGridThrows) {
  DpConfig cfg = DpConfig::defaults();
  const DpSolver solver(cfg, params(), 0);
  EXPECT_THROW(solver.rollout(BatteryState{1.0, 0.0, 20.0, 60.0}),
               std::invalid_argument);
}

TEST(DpController, PlaysPlanAndHoldsTail) {
  DpConfig cfg;
  cfg.w1 = 0.0;
  cfg.w2 = 0.0;
  cfg.t_max = 1e9;
  cfg.dt = 20.0;
  cfg.soc_grid = nodes(0.0, 1.0, 11);
  cfg.tc_grid = nodes(15.0, 55.0, 5);
  cfg.u_grid = nodes(0.0, 40.0, 3);

  DpController controller(cfg, params(), BatteryState{1.0, 0.0, 20.0, 20.0});
  ControllerInputs in;
  ControllerCommand last;
  for (int k = 0; k < 400; ++k) last = controller.step(in, 20.0);
  EXPECT_DOUBLE_EQ(last.current, 40.0);  // tail hold of a bang plan
  EXPECT_NE(last.diagnostics.find("tail_hold"), std::string::npos);
}
