#pragma once

#include <Eigen/Dense>

#include "celldrain/errors.hpp"

// H-representation polytope arithmetic: {x : A x <= b} with rows normalized
// to unit Euclidean norm. Sets may be unbounded (support returns +inf in
// unbounded directions) but never empty: every construction certifies
// nonemptiness with one feasibility solve and throws EmptySetError otherwise.
// All operations are pure; instances are immutable values.
namespace celldrain {

class Polytope {
 public:
  // Canonicalizes (unit-norm rows), rejects zero rows, certifies
  // nonemptiness. Throws std::invalid_argument / EmptySetError.
  Polytope(Eigen::MatrixXd a, Eigen::VectorXd b);

  // Axis-aligned box {lo <= x <= hi}.
  static Polytope box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi);
  // Degenerate singleton {point}.
  static Polytope singleton(const Eigen::VectorXd& point);

  int dim() const { return static_cast<int>(a_.cols()); }
  Eigen::Index num_rows() const { return a_.rows(); }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }

  // Elementwise A x <= b + tol.
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;

  // A point certified feasible at construction time.
  const Eigen::VectorXd& feasible_point() const { return feasible_; }

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
  Eigen::VectorXd feasible_;
};

// max_{x in p} direction'x; +inf when p is unbounded in that direction.
// Throws std::invalid_argument on a zero direction.
double support(const Polytope& p, const Eigen::VectorXd& direction);

// Minkowski sum p (+) q as the tightest outer H-polytope over the merged
// normal sets of both operands (exact for the 1-D and 2-D sets used here),
// followed by redundancy removal.
Polytope minkowski_sum(const Polytope& p, const Polytope& q);

// Pontryagin difference p (-) q: offsets of p eroded by the support of q.
// An empty result throws OverTightenedError (the disturbance set is too
// large for the constraints).
Polytope pontryagin_diff(const Polytope& p, const Polytope& q);

// Image m*p. Exact for invertible square maps and for 1-D targets; wider
// targets are outer-approximated over a deterministic direction fan.
// Throws on rank-deficient maps.
Polytope linear_map(const Eigen::MatrixXd& m, const Polytope& p);

// p x q by block-diagonal stacking.
Polytope cartesian_product(const Polytope& p, const Polytope& q);

// Drops rows that stay below their offset (+1e-9) when maximized subject to
// the remaining rows; greedy, one row at a time.
Polytope remove_redundancy(const Polytope& p);

// Chebyshev center (deepest point); requires a bounded set.
Eigen::VectorXd chebyshev_center(const Polytope& p);

// Outer approximation of the minimal robust positively invariant set of
// e(k+1) = a_k e(k) + w, w in w_set.
struct RpiResult {
  Polytope set;
  int s_steps;     // truncation index of the power series
  double alpha;    // contraction scalar in [0, 1)
  double epsilon;  // achieved approximation tolerance (Hausdorff bound)
};

// Rakovic-style epsilon-outer approximation: finds the smallest s with
// a_k^s W inside alpha*W and alpha <= eps/(eps + M(s)), then returns
// (1-alpha)^{-1} (+)_{i<s} a_k^i W as an H-polytope whose invariance
// a_k R (+) W subseteq R is verified row-by-row before returning.
//
// Preconditions: spectral radius of a_k < 1 and the origin interior to
// w_set (both checked). Throws ConvergenceError when s exceeds s_cap.
RpiResult compute_mrpi(const Eigen::MatrixXd& a_k, const Polytope& w_set,
                       double epsilon, int s_cap = 200);

}  // namespace celldrain
