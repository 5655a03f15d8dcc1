#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace celldrain {

// Base class for all library failures that are not plain precondition
// violations (those throw std::invalid_argument directly).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed configuration: bad file, unknown key, invariant-violating value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An integration step produced a non-finite state. Carries the offending
// state vector so callers can log where the plant blew up.
class NumericalBlowupError : public Error {
 public:
  NumericalBlowupError(const std::string& what, const Eigen::Vector4d& state)
      : Error(what), state_(state) {}
  const Eigen::Vector4d& state() const { return state_; }

 private:
  Eigen::Vector4d state_;
};

// A polytope operation produced (or was handed) an empty set.
class EmptySetError : public Error {
 public:
  using Error::Error;
};

// Constraint tightening emptied the feasible set: the disturbance set is too
// large for the constraints. Carries the first offending constraint row.
class OverTightenedError : public Error {
 public:
  OverTightenedError(const std::string& what, int row) : Error(what), row_(row) {}
  int row() const { return row_; }

 private:
  int row_ = -1;
};

// An iterative computation (RPI truncation, Riccati recursion, value
// iteration) failed to converge within its cap.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Kalman update hit a singular innovation covariance.
class EstimatorDegenerateError : public Error {
 public:
  using Error::Error;
};

// Gain/set synthesis failed (Riccati divergence, non-PSD Hessian, ...).
class SynthesisError : public Error {
 public:
  using Error::Error;
};

// A controller could not produce a command (e.g. QP iteration cap). Carries
// the solver status string for the trace.
class ControllerFaultError : public Error {
 public:
  ControllerFaultError(const std::string& what, std::string detail)
      : Error(what), detail_(std::move(detail)) {}
  const std::string& detail() const { return detail_; }

 private:
  std::string detail_;
};

}  // namespace celldrain
