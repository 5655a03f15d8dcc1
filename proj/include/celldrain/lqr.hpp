#pragma once

#include <Eigen/Dense>

#include "celldrain/errors.hpp"

namespace celldrain {

// Discrete-time LQR gain K for u = K x, chosen so that A + B K is
// Schur-stable. Solves the Riccati recursion to a fixed point (relative
// tolerance 1e-10) and asserts the closed-loop spectral radius before
// returning. Throws SynthesisError when the recursion diverges or the
// closed loop is not stable (unstabilizable pair, indefinite weights...).
Eigen::MatrixXd design_feedback_gain(const Eigen::MatrixXd& a,
                                     const Eigen::MatrixXd& b,
                                     const Eigen::MatrixXd& q,
                                     const Eigen::MatrixXd& r);

// Spectral radius of a square matrix.
double spectral_radius(const Eigen::MatrixXd& m);

}  // namespace celldrain
