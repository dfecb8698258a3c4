#pragma once

#include <stdexcept>
#include <string>

namespace fixedrank {

/// Base class for every numerical failure raised by the library.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A factor lost column rank (smallest singular value at or below the
/// repo-wide relative tolerance). Line searches catch this and shrink.
class RankDropError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Lyapunov/Sylvester coefficient matrix is (numerically) singular.
class SingularCoefficientError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SymmetryError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Polynomial has no global minimizer.
class UnboundedError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class LineSearchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Raised when a diagnostic probe produces NaN/Inf.
class DiagnosticsError : public NumericalError {
 public:
  DiagnosticsError(const std::string& what, double step)
      : NumericalError(what), step_(step) {}
  double step() const { return step_; }

 private:
  double step_;
};

}  // namespace fixedrank
