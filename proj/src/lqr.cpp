#include "celldrain/lqr.hpp"

#include <cmath>

namespace celldrain {

double spectral_radius(const Eigen::MatrixXd& m) {
  return m.eigenvalues().cwiseAbs().maxCoeff();
}

Eigen::MatrixXd design_feedback_gain(const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b,
                                     const Eigen::MatrixXd& q,
                                     const Eigen::MatrixXd& r) {
  const int n = static_cast<int>(a.rows());
  const int nu = static_cast<int>(b.cols());
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != nu || r.cols() != nu) {
    throw std::invalid_argument("design_feedback_gain: dimension mismatch");
  }

  constexpr double kRelTol = 1e-10;
  constexpr int kMaxIterations = 500000;

  Eigen::MatrixXd p = q;
  for (int it = 0; it < kMaxIterations; ++it) {
    const Eigen::MatrixXd btp = b.transpose() * p;
    const Eigen::MatrixXd gain_den = r + btp * b;
    const Eigen::MatrixXd p_next =
        q + a.transpose() * p * a -
        a.transpose() * p * b * gain_den.ldlt().solve(btp * a);
    const double diff = (p_next - p).cwiseAbs().maxCoeff();
    const double scale = std::max(1.0, p_next.cwiseAbs().maxCoeff());
    p = p_next;
    if (!p.allFinite() || scale > 1e14) {
      throw SynthesisError("design_feedback_gain: Riccati recursion diverged");
    }
    if (diff <= kRelTol * scale) {
      const Eigen::MatrixXd k =
          -(r + b.transpose() * p * b).ldlt().solve(b.transpose() * p * a);
      if (spectral_radius(a + b * k) >= 1.0) {
        throw SynthesisError("design_feedback_gain: closed loop is not Schur-stable");
      }
      return k;
    }
  }
  throw SynthesisError("design_feedback_gain: Riccati recursion did not converge");
}

}  // namespace celldrain
