#include "celldrain/qp.hpp"

#include <algorithm>
#include <cmath>

namespace celldrain {

namespace {

double inf_norm(const Eigen::VectorXd& v) {
  return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff();
}

// Re-solves the equality system on the ADMM-identified active set. Accepted
// only on a verified KKT certificate; otherwise the ADMM iterate stands.
void try_polish(const QpProblem& qp, QpSolution* sol) {
  const int n = static_cast<int>(qp.hessian.rows());
  const int m = static_cast<int>(qp.constraint.rows());

  std::vector<int> rows;
  std::vector<double> rhs;
  std::vector<int> sign;  // +1 upper, -1 lower, 0 equality
  const double y_tol = 1e-6 * std::max(1.0, inf_norm(sol->dual));
  for (int i = 0; i < m; ++i) {
    if (qp.upper[i] - qp.lower[i] < 1e-12) {
      rows.push_back(i);
      rhs.push_back(qp.upper[i]);
      sign.push_back(0);
    } else if (sol->dual[i] > y_tol) {
      rows.push_back(i);
      rhs.push_back(qp.upper[i]);
      sign.push_back(1);
    } else if (sol->dual[i] < -y_tol) {
      rows.push_back(i);
      rhs.push_back(qp.lower[i]);
      sign.push_back(-1);
    }
  }
  const int k = static_cast<int>(rows.size());

  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
  kkt.topLeftCorner(n, n) = qp.hessian;
  Eigen::VectorXd b(n + k);
  b.head(n) = -qp.gradient;
  for (int i = 0; i < k; ++i) {
    kkt.block(n + i, 0, 1, n) = qp.constraint.row(rows[i]);
    kkt.block(0, n + i, n, 1) = qp.constraint.row(rows[i]).transpose();
    b[n + i] = rhs[i];
  }
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(kkt);
  const Eigen::VectorXd sol_kkt = lu.solve(b);
  if ((kkt * sol_kkt - b).cwiseAbs().maxCoeff() >
      1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) {
    return;  // singular or inconsistent active set
  }
  const Eigen::VectorXd x = sol_kkt.head(n);
  if (!x.allFinite()) return;

  // Accept only on a full KKT certificate: primal feasibility plus correct
  // dual signs on the identified active set (sufficient for a convex QP).
  const Eigen::VectorXd mx = qp.constraint * x;
  const double feas_tol = 1e-8 * std::max(1.0, inf_norm(mx));
  for (int i = 0; i < m; ++i) {
    if (mx[i] > qp.upper[i] + feas_tol || mx[i] < qp.lower[i] - feas_tol) return;
  }
  const Eigen::VectorXd nu = sol_kkt.tail(k);
  const double dual_tol = 1e-9 * std::max(1.0, inf_norm(nu));
  for (int i = 0; i < k; ++i) {
    if (sign[i] > 0 && nu[i] < -dual_tol) return;
    if (sign[i] < 0 && nu[i] > dual_tol) return;
  }

  sol->x = x;
  Eigen::VectorXd dual = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < k; ++i) dual[rows[i]] = sol_kkt[n + i];
  sol->dual = dual;
}

}  // namespace

QpSolution qp_solve(const QpProblem& qp_in, const QpSettings& settings,
                    const Eigen::VectorXd* x_warm, const Eigen::VectorXd* y_warm) {
  const int n = static_cast<int>(qp_in.hessian.rows());
  const int m = static_cast<int>(qp_in.constraint.rows());
  if (qp_in.hessian.cols() != n || qp_in.gradient.size() != n ||
      qp_in.constraint.cols() != n || qp_in.lower.size() != m ||
      qp_in.upper.size() != m) {
    throw std::invalid_argument("qp_solve: dimension mismatch");
  }
  if (!qp_in.hessian.isApprox(qp_in.hessian.transpose(), 1e-10)) {
    throw SynthesisError("qp_solve: Hessian is not symmetric");
  }
  {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(qp_in.hessian);
    const double scale = std::max(1.0, qp_in.hessian.cwiseAbs().maxCoeff());
    if (ldlt.info() != Eigen::Success ||
        (ldlt.vectorD().array() < -1e-8 * scale).any()) {
      throw SynthesisError("qp_solve: Hessian is not positive semidefinite");
    }
  }

  // Row equilibration: unit-norm constraint rows condition the splitting.
  // Duals are mapped back to the caller's rows on exit.
  QpProblem qp = qp_in;
  Eigen::VectorXd row_norm = Eigen::VectorXd::Ones(m);
  for (int i = 0; i < m; ++i) {
    const double nrm = qp.constraint.row(i).norm();
    if (nrm > 1e-12) {
      row_norm[i] = nrm;
      qp.constraint.row(i) /= nrm;
      if (qp.lower[i] > -1e29) qp.lower[i] /= nrm;
      if (qp.upper[i] < 1e29) qp.upper[i] /= nrm;
    }
  }

  const Eigen::MatrixXd& p = qp.hessian;
  const Eigen::MatrixXd& mat = qp.constraint;

  // Per-row penalties: equality rows are enforced much harder.
  Eigen::VectorXd rho(m);
  for (int i = 0; i < m; ++i) {
    rho[i] = (qp.upper[i] - qp.lower[i] < 1e-12) ? settings.rho * 1e3 : settings.rho;
  }
  double rho_scale = 1.0;

  auto factorize = [&](double scale_now) {
    Eigen::MatrixXd k = p + settings.sigma * Eigen::MatrixXd::Identity(n, n);
    if (m > 0) k += mat.transpose() * (rho * scale_now).asDiagonal() * mat;
    return Eigen::LLT<Eigen::MatrixXd>(k);
  };
  Eigen::LLT<Eigen::MatrixXd> kkt = factorize(rho_scale);

  Eigen::VectorXd x = (x_warm && x_warm->size() == n) ? *x_warm
                                                      : Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = (y_warm && y_warm->size() == m)
                          ? y_warm->cwiseProduct(row_norm)
                          : Eigen::VectorXd::Zero(m);
  Eigen::VectorXd z = mat * x;
  for (int i = 0; i < m; ++i) {
    z[i] = std::clamp(z[i], qp.lower[i], qp.upper[i]);
  }

  QpSolution sol;
  for (int it = 1; it <= settings.max_iterations; ++it) {
    const Eigen::VectorXd rho_now = rho * rho_scale;

    Eigen::VectorXd rhs = settings.sigma * x - qp.gradient;
    if (m > 0) rhs += mat.transpose() * (rho_now.cwiseProduct(z) - y);
    const Eigen::VectorXd x_tilde = kkt.solve(rhs);
    const Eigen::VectorXd z_tilde = mat * x_tilde;

    x = settings.relaxation * x_tilde + (1.0 - settings.relaxation) * x;
    const Eigen::VectorXd z_relaxed =
        settings.relaxation * z_tilde + (1.0 - settings.relaxation) * z;
    Eigen::VectorXd z_new(m);
    for (int i = 0; i < m; ++i) {
      z_new[i] = std::clamp(z_relaxed[i] + y[i] / rho_now[i], qp.lower[i], qp.upper[i]);
    }
    y += rho_now.cwiseProduct(z_relaxed - z_new);
    z = z_new;

    if (it % 10 == 0 || it == settings.max_iterations) {
      const Eigen::VectorXd mx = mat * x;
      const Eigen::VectorXd px = p * x;
      const Eigen::VectorXd mty = mat.transpose() * y;
      const double r_prim = inf_norm(mx - z);
      const double r_dual = inf_norm(px + qp.gradient + mty);
      const double eps_prim =
          settings.eps * std::max({inf_norm(mx), inf_norm(z), 1.0});
      const double eps_dual = settings.eps *
          std::max({inf_norm(px), inf_norm(mty), inf_norm(qp.gradient), 1.0});
      if (r_prim <= eps_prim && r_dual <= eps_dual) {
        sol.status = QpSolution::Status::kSolved;
        sol.x = x;
        sol.dual = y;
        sol.iterations = it;
        sol.primal_residual = r_prim;
        sol.dual_residual = r_dual;
        try_polish(qp, &sol);
        sol.dual = sol.dual.cwiseQuotient(row_norm);
        return sol;
      }
      if (it % settings.rho_update_interval == 0) {
        const double ratio = (r_prim / std::max(eps_prim, 1e-30)) /
                             std::max(r_dual / std::max(eps_dual, 1e-30), 1e-30);
        const double adj = std::clamp(std::sqrt(ratio), 1e-3, 1e3);
        if (adj > 5.0 || adj < 0.2) {
          rho_scale = std::clamp(rho_scale * adj, 1e-6, 1e6);
          kkt = factorize(rho_scale);
        }
      }
      sol.primal_residual = r_prim;
      sol.dual_residual = r_dual;
    }
  }

  sol.status = QpSolution::Status::kIterationLimit;
  sol.x = x;
  sol.dual = y.cwiseQuotient(row_norm);
  sol.iterations = settings.max_iterations;
  return sol;
}

}  // namespace celldrain
