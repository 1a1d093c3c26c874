#pragma once

#include <stdexcept>
#include <string>

namespace skf {

/// Operand dimensions do not conform.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Ellipsoid with a (numerically) singular shape used where a bounded,
/// full-dimensional set is required.
class DegenerateEllipsoidError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Non-finite value, singular system or other arithmetic breakdown. Carries
/// the time step at which it happened (-1 when not step-related).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what, int step = -1)
      : std::runtime_error(step >= 0 ? what + " (step " + std::to_string(step) + ")" : what),
        step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// The innovation-covariance bracket of a gain computation is not invertible.
class SingularInnovationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// The scalar minimizer could not locate an interior minimum.
class OptimizerError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace skf
