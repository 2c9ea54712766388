#pragma once

#include <stdexcept>
#include <string>

namespace zimpute {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: dimension mismatch, non-finite entry, invariant violation.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A quantity was requested for a unit on which it is not observed.
class NotObservedError : public Error {
 public:
  using Error::Error;
};

/// Iterative fit did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// Logistic fit diverges because the responses are perfectly separated.
class SeparationError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

/// The residual donor pool is empty.
class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

/// A matrix could not be inverted even after eigenvalue clamping.
class SingularMatrixError : public Error {
 public:
  using Error::Error;
};

/// Sampling design cannot be realized (n > N, rejection cap exceeded, ...).
class DesignError : public Error {
 public:
  using Error::Error;
};

}  // namespace zimpute
