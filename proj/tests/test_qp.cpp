#include "celldrain/qp.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

using namespace celldrain;

namespace {

constexpr double kInf = 1e30;

double objective(const QpProblem& qp, const Eigen::VectorXd& x) {
  return 0.5 * x.dot(qp.hessian * x) + qp.gradient.dot(x);
}

// Independent reference: textbook primal active-set method for
//   min 0.5 x'Hx + g'x  s.t.  A x <= b,
// started from a strictly feasible point. Test-only; shares no code with
// the ADMM solver under test.
Eigen::VectorXd active_set_reference(const Eigen::MatrixXd& h,
                                     const Eigen::VectorXd& g,
                                     const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& b,
                                     const Eigen::VectorXd& x0) {
  const int n = static_cast<int>(h.rows());
  const int m = static_cast<int>(a.rows());
  Eigen::VectorXd x = x0;
  std::vector<int> working;

  for (int iter = 0; iter < 4000; ++iter) {
    const int k = static_cast<int>(working.size());
    Eigen::MatrixXd kkt(n + k, n + k);
    kkt.setZero();
    kkt.topLeftCorner(n, n) = h;
    for (int i = 0; i < k; ++i) {
      kkt.block(n + i, 0, 1, n) = a.row(working[i]);
      kkt.block(0, n + i, n, 1) = a.row(working[i]).transpose();
    }
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = -(h * x + g);
    rhs.tail(k).setZero();
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);
    const Eigen::VectorXd lambda = sol.tail(k);

    if (p.norm() < 1e-11) {
      int most_negative = -1;
      double worst = -1e-9;
      for (int i = 0; i < k; ++i) {
        if (lambda[i] < worst) {
          worst = lambda[i];
          most_negative = i;
        }
      }
      if (most_negative < 0) return x;  // KKT satisfied
      working.erase(working.begin() + most_negative);
      continue;
    }

    double alpha = 1.0;
    int blocking = -1;
    for (int i = 0; i < m; ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double ap = a.row(i).dot(p);
      if (ap > 1e-12) {
        const double step = (b[i] - a.row(i).dot(x)) / ap;
        if (step < alpha) {
          alpha = step;
          blocking = i;
        }
      }
    }
    x += alpha * p;
    if (blocking >= 0) working.push_back(blocking);
  }
  return x;
}

}  // namespace

TEST(QpSolve, UnconstrainedEqualsLinearSolve) {
  const int n = 6;
  std::mt19937_64 rng(2);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m(i, j) = gauss(rng);
  }
  QpProblem qp;
  qp.hessian = m.transpose() * m + Eigen::MatrixXd::Identity(n, n);
  qp.gradient = Eigen::VectorXd::NullaryExpr(n, [&](int) { return gauss(rng); });
  qp.constraint = Eigen::MatrixXd::Zero(0, n);
  qp.lower = Eigen::VectorXd(0);
  qp.upper = Eigen::VectorXd(0);

  const QpSolution sol = qp_solve(qp);
  ASSERT_EQ(sol.status, QpSolution::Status::kSolved);
  const Eigen::VectorXd direct = -qp.hessian.ldlt().solve(qp.gradient);
  EXPECT_LT((sol.x - direct).norm(), 1e-8 * std::max(1.0, direct.norm()));
}

TEST(QpSolve, BoxClampsExteriorMinimizer) {
  QpProblem qp;
  qp.hessian = Eigen::MatrixXd::Constant(1, 1, 2.0);
  qp.gradient = Eigen::VectorXd::Constant(1, -10.0);  // unconstrained min at 5
  qp.constraint = Eigen::MatrixXd::Identity(1, 1);
  qp.lower = Eigen::VectorXd::Constant(1, -1.0);
  qp.upper = Eigen::VectorXd::Constant(1, 2.0);
  const QpSolution sol = qp_solve(qp);
  ASSERT_EQ(sol.status, QpSolution::Status::kSolved);
  EXPECT_NEAR(sol.x[0], 2.0, 1e-6);
}

TEST(QpSolve, EqualityRowsAreRespected) {
  // min ||x||^2 s.t. x0 + x1 = 1 -> x = (0.5, 0.5).
  QpProblem qp;
  qp.hessian = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  qp.gradient = Eigen::VectorXd::Zero(2);
  qp.constraint = Eigen::MatrixXd::Ones(1, 2);
  qp.lower = Eigen::VectorXd::Constant(1, 1.0);
  qp.upper = Eigen::VectorXd::Constant(1, 1.0);
  const QpSolution sol = qp_solve(qp);
  ASSERT_EQ(sol.status, QpSolution::Status::kSolved);
  EXPECT_NEAR(sol.x[0], 0.5, 1e-6);
  EXPECT_NEAR(sol.x[1], 0.5, 1e-6);
}

TEST(QpSolve, MatchesActiveSetReferenceOnRandomFeasibleQps) {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss;
  std::uniform_int_distribution<int> dim(2, 30);
  std::uniform_real_distribution<double> slack(0.1, 1.0);

  int worst_trial = -1;
  double worst_rel = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n = dim(rng);
    const int m = std::uniform_int_distribution<int>(1, 2 * n)(rng);

    Eigen::MatrixXd basis(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) basis(i, j) = gauss(rng);
    }
    QpProblem qp;
    qp.hessian = basis.transpose() * basis + Eigen::MatrixXd::Identity(n, n);
    qp.gradient = Eigen::VectorXd::NullaryExpr(n, [&](int) { return gauss(rng); });
    qp.constraint = Eigen::MatrixXd::NullaryExpr(m, n, [&](int, int) { return gauss(rng); });
    const Eigen::VectorXd x0 =
        Eigen::VectorXd::NullaryExpr(n, [&](int) { return 0.3 * gauss(rng); });
    qp.upper = qp.constraint * x0 +
               Eigen::VectorXd::NullaryExpr(m, [&](int) { return slack(rng); });
    qp.lower = Eigen::VectorXd::Constant(m, -kInf);

    const QpSolution sol = qp_solve(qp);
    ASSERT_EQ(sol.status, QpSolution::Status::kSolved) << "trial " << trial;
    const Eigen::VectorXd ref =
        active_set_reference(qp.hessian, qp.gradient, qp.constraint, qp.upper, x0);

    const double f_sol = objective(qp, sol.x);
    const double f_ref = objective(qp, ref);
    const double rel = std::abs(f_sol - f_ref) / std::max(1.0, std::abs(f_ref));
    if (rel > worst_rel) {
      worst_rel = rel;
      worst_trial = trial;
    }
  }
  EXPECT_LE(worst_rel, 1e-6) << "worst trial " << worst_trial;
}

TEST(QpSolve, RejectsIndefiniteHessian) {
  QpProblem qp;
  qp.hessian = -Eigen::MatrixXd::Identity(2, 2);
  qp.gradient = Eigen::VectorXd::Zero(2);
  qp.constraint = Eigen::MatrixXd::Zero(0, 2);
  qp.lower = Eigen::VectorXd(0);
  qp.upper = Eigen::VectorXd(0);
  EXPECT_THROW(qp_solve(qp), SynthesisError);
}

TEST(QpSolve, WarmStartReachesSameSolution) {
  QpProblem qp;
  qp.hessian = 2.0 * Eigen::MatrixXd::Identity(3, 3);
  qp.gradient = Eigen::VectorXd::Constant(3, -1.0);
  qp.constraint = Eigen::MatrixXd::Identity(3, 3);
  qp.lower = Eigen::VectorXd::Constant(3, 0.0);
  qp.upper = Eigen::VectorXd::Constant(3, 0.3);

  const QpSolution cold = qp_solve(qp);
  ASSERT_EQ(cold.status, QpSolution::Status::kSolved);
  const QpSolution warm = qp_solve(qp, {}, &cold.x, &cold.dual);
  ASSERT_EQ(warm.status, QpSolution::Status::kSolved);
  EXPECT_LT((warm.x - cold.x).norm(), 1e-5);
  EXPECT_LE(warm.iterations, cold.iterations);
}
