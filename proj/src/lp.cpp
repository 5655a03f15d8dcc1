#include "celldrain/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace celldrain {

namespace {

constexpr double kPivotTol = 1e-11;
constexpr double kFeasTol = 1e-9;

// Dense tableau simplex on equality form: min c'z s.t. T z = rhs, z >= 0.
// Bland's rule throughout, so it cannot cycle.
class Tableau {
 public:
  Tableau(int rows, int cols) : m_(rows), n_(cols), t_(rows, cols + 1), basis_(rows) {
    t_.setZero();
  }

  double& at(int r, int c) { return t_(r, c); }
  double& rhs(int r) { return t_(r, n_); }
  void set_basis(int r, int col) { basis_[r] = col; }
  int basis(int r) const { return basis_[r]; }
  int rows() const { return m_; }

  // Price out the objective row for cost vector `cost` over the current
  // basis, returning reduced costs and the (negated) objective value.
  void reduced_costs(const std::vector<double>& cost, Eigen::VectorXd* red,
                     double* obj) const {
    Eigen::VectorXd y(n_);
    for (int j = 0; j < n_; ++j) y[j] = cost[j];
    double v = 0.0;
    for (int r = 0; r < m_; ++r) {
      const double cb = cost[basis_[r]];
      if (cb == 0.0) continue;
      v += cb * t_(r, n_);
      for (int j = 0; j < n_; ++j) y[j] -= cb * t_(r, j);
    }
    *red = y;
    *obj = v;
  }

  void pivot(int row, int col) {
    const double p = t_(row, col);
    t_.row(row) /= p;
    for (int r = 0; r < m_; ++r) {
      if (r == row) continue;
      const double f = t_(r, col);
      if (f != 0.0) t_.row(r) -= f * t_.row(row);
    }
    basis_[row] = col;
  }

  // Minimizes `cost`; returns false when unbounded.
  bool run(const std::vector<double>& cost, int allowed_cols) {
    for (;;) {
      Eigen::VectorXd red;
      double obj;
      reduced_costs(cost, &red, &obj);
      int enter = -1;
      for (int j = 0; j < allowed_cols; ++j) {
        if (red[j] < -kPivotTol) {
          enter = j;  // Bland: first improving column
          break;
        }
      }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int r = 0; r < m_; ++r) {
        const double a = t_(r, enter);
        if (a > kPivotTol) {
          const double ratio = t_(r, n_) / a;
          if (ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && (leave < 0 || basis_[r] < basis_[leave]))) {
            best = ratio;
            leave = r;
          }
        }
      }
      if (leave < 0) return false;  // unbounded in this column
      pivot(leave, enter);
    }
  }

 private:
  int m_, n_;
  Eigen::MatrixXd t_;
  std::vector<int> basis_;
};

}  // namespace

LpResult solve_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& a,
                      const Eigen::VectorXd& b) {
  const int m = static_cast<int>(a.rows());
  const int n = static_cast<int>(a.cols());
  if (c.size() != n || b.size() != m) {
    throw std::invalid_argument("LP dimension mismatch");
  }

  // Equality form with split free variables: columns are [x+ (n), x- (n),
  // slack (m), artificial (<= m)].
  const int n_struct = 2 * n + m;
  int n_art = 0;
  for (int i = 0; i < m; ++i) {
    if (b[i] < 0.0) ++n_art;
  }
  const int n_cols = n_struct + n_art;

  Tableau tab(m, n_cols);
  int art = n_struct;
  for (int i = 0; i < m; ++i) {
    const double sign = (b[i] < 0.0) ? -1.0 : 1.0;
    for (int j = 0; j < n; ++j) {
      tab.at(i, j) = sign * a(i, j);
      tab.at(i, n + j) = -sign * a(i, j);
    }
    tab.at(i, 2 * n + i) = sign;  // slack
    tab.rhs(i) = sign * b[i];
    if (sign < 0.0) {
      tab.at(i, art) = 1.0;
      tab.set_basis(i, art);
      ++art;
    } else {
      tab.set_basis(i, 2 * n + i);
    }
  }

  LpResult res;

  if (n_art > 0) {
    std::vector<double> phase1(n_cols, 0.0);
    for (int j = n_struct; j < n_cols; ++j) phase1[j] = 1.0;
    if (!tab.run(phase1, n_cols)) {
      throw std::runtime_error("phase-1 LP unbounded (internal error)");
    }
    Eigen::VectorXd red;
    double obj;
    tab.reduced_costs(phase1, &red, &obj);
    if (obj > kFeasTol) {
      res.status = LpResult::Status::kInfeasible;
      return res;
    }
    // Pivot any artificial still in the basis onto a structural column.
    for (int r = 0; r < tab.rows(); ++r) {
      if (tab.basis(r) >= n_struct) {
        for (int j = 0; j < n_struct; ++j) {
          if (std::abs(tab.at(r, j)) > kPivotTol) {
            tab.pivot(r, j);
            break;
          }
        }
      }
    }
  }

  // Phase 2: minimize -c'(x+ - x-), artificials excluded.
  std::vector<double> phase2(n_cols, 0.0);
  for (int j = 0; j < n; ++j) {
    phase2[j] = -c[j];
    phase2[n + j] = c[j];
  }
  for (int j = n_struct; j < n_cols; ++j) phase2[j] = 1e30;  // wall off artificials

  if (!tab.run(phase2, n_struct)) {
    res.status = LpResult::Status::kUnbounded;
    return res;
  }

  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < tab.rows(); ++r) {
    const int bcol = tab.basis(r);
    if (bcol < n) {
      x[bcol] += tab.rhs(r);
    } else if (bcol < 2 * n) {
      x[bcol - n] -= tab.rhs(r);
    }
  }
  res.status = LpResult::Status::kOptimal;
  res.x = x;
  res.value = c.dot(x);
  return res;
}

}  // namespace celldrain
