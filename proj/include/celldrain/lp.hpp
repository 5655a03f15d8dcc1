#pragma once

#include <Eigen/Dense>

namespace celldrain {

// Result of a small dense linear program.
struct LpResult {
  enum class Status { kOptimal, kUnbounded, kInfeasible };
  Status status = Status::kInfeasible;
  double value = 0.0;    // objective at the optimum (meaningful when optimal)
  Eigen::VectorXd x;     // optimizer (meaningful when optimal)
};

// Maximizes c'x subject to a*x <= b with x free, via a self-contained
// two-phase tableau simplex with Bland's rule. Intended for the tiny
// support-function and feasibility LPs of the polytope module (a few dozen
// rows, single-digit dimensions); not a general-purpose solver.
LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                      const Eigen::VectorXd& b);

}  // namespace celldrain
