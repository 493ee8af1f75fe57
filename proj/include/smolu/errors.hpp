#pragma once

#include <stdexcept>
#include <string>

namespace smolu {

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Weight grows at least as fast as the exponential tail decays.
class DivergentTailError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Non-integrable behavior near the origin.
class DivergenceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Transform evaluated at or beyond the singularity.
class IntegrabilityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroProfileError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class NonpositiveValuesError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ZeroDistanceError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepCollapseError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientGridError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace smolu
