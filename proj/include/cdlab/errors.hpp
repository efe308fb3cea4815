#pragma once

#include <stdexcept>
#include <string>

namespace cdlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point or argument lies outside the domain an operation accepts.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An operation's precondition does not hold (bad resolution, bad grid, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds a configured cap.
class CapacityError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Dual potentials failed the optimality certificate.
class CertificationError : public Error {
 public:
  CertificationError(const std::string& what, double gap) : Error(what), gap_(gap) {}
  double gap() const { return gap_; }

 private:
  double gap_;
};

/// Mass sits on a cell of zero volume, so no density exists there.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// Hamilton-Jacobi shift is undefined (no finite value) or ill posed (-inf present).
class ShiftError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace cdlab
