#pragma once

#include <stdexcept>
#include <string>

namespace mkflow {

// Base of all library errors. Messages are tagged "[module] ..." at the
// throw site so callers can report the failing subsystem.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Degenerate or inconsistent geometry (zero-area triangle, empty bbox, ...).
class InvalidGeometryError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Linear solver did not reach the requested residual.
class SolverError : public Error {
 public:
  SolverError(const std::string& msg, double residual, long iterations)
      : Error(msg), rel_residual(residual), iterations(iterations) {}
  double rel_residual = 0.0;
  long iterations = 0;
};

// System is (effectively) singular: isolated vertex with nonzero source,
// or a Kirchhoff residual far above the consistency threshold.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

// A diagnostic was requested on a state it is not defined for
// (e.g. empty transport support).
class DegenerateStateError : public Error {
 public:
  using Error::Error;
};

// variation() with an identically zero reference field.
class UndefinedVariationError : public Error {
 public:
  using Error::Error;
};

// Malformed or out-of-range run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File parse/write failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mkflow
