#pragma once

#include <stdexcept>
#include <string>

namespace evenres {

// Base of all toolkit errors.  CLI maps subclasses to exit codes:
// UsageError -> 2, BudgetError/CoverageError -> 3, everything else -> 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : Error {
  using Error::Error;
};

// Work or accuracy budget exhausted before the requested tolerance was met.
struct BudgetError : Error {
  using Error::Error;
};

// A scan could not certify that it found every zero in its region.
struct CoverageError : BudgetError {
  using BudgetError::BudgetError;
};

// Argument within tolerance of a sector boundary (multiple of pi), or a
// zero detected too close to an integration contour.
struct BoundaryError : Error {
  using Error::Error;
};

// Evaluation requested too close to a pole or zero of the function.
struct PoleProximityError : Error {
  using Error::Error;
};

// (order, |z|) outside the supported range of the special-function kernels,
// or a value not representable in double precision.
struct EnvelopeError : Error {
  using Error::Error;
};

struct InternalError : Error {
  using Error::Error;
};

}  // namespace evenres
