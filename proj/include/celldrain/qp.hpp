#pragma once

#include <Eigen/Dense>

#include "celldrain/errors.hpp"

namespace celldrain {

// Convex QP in OSQP form:
//   min 0.5 z'Pz + g'z   s.t.  lower <= M z <= upper
// Equality rows are expressed with lower == upper.
struct QpProblem {
  Eigen::MatrixXd hessian;     // P, symmetric positive semidefinite
  Eigen::VectorXd gradient;    // g
  Eigen::MatrixXd constraint;  // M
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpSettings {
  double eps = 1e-6;       // scaled primal/dual residual tolerance
  int max_iterations = 20000;
  double rho = 0.1;        // ADMM penalty (equality rows get 1e3x)
  double sigma = 1e-6;
  double relaxation = 1.6;
  int rho_update_interval = 100;
};

struct QpSolution {
  enum class Status { kSolved, kIterationLimit };
  Status status = Status::kIterationLimit;
  Eigen::VectorXd x;
  Eigen::VectorXd dual;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

// Dual-ascent/operator-splitting (ADMM) QP solver. Terminates when the
// infinity-norm primal and dual residuals drop below eps scaled by the
// magnitudes of the corresponding terms. Throws SynthesisError if the
// Hessian fails a (tolerant) positive-semidefiniteness check. Optional
// primal/dual warm starts skip the cold ramp-up.
QpSolution qp_solve(const QpProblem& qp, const QpSettings& settings = {},
                    const Eigen::VectorXd* x_warm = nullptr,
                    const Eigen::VectorXd* y_warm = nullptr);

}  // namespace celldrain
