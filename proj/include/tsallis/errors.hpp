#pragma once

#include <stdexcept>
#include <string>

namespace tsallis {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (e.g. ln_q of x <= 0).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Operation is not defined for the given entropic index (e.g. ln_q at q = infinity).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// A documented precondition does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Tables or vectors of incompatible dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; message carries line/field context.
class ParseError : public Error {
 public:
  using Error::Error;
};

// A type invariant was violated (non-stochastic row, gamma out of range, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

// An iterative method hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

// Iterates left the configured magnitude bound.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace tsallis
