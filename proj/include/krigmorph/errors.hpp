#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace krigmorph {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// An argument outside the mathematical domain of an operation (negative
/// distance, empty point list, non-positive length scale).
class DomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

class DimensionMismatch : public Error {
public:
  using Error::Error;
};

/// Numerical failures: matrices that cannot be factorized, exhausted
/// candidate sets, broken positive semi-definiteness.
class NumericalError : public Error {
public:
  using Error::Error;
};

class SingularMatrixError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class NoSelectableCandidate : public NumericalError {
public:
  using NumericalError::NumericalError;
};

class InternalConsistencyError : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Raised when the pivot of an incremental Cholesky extension is not
/// positive, i.e. the new point is already fully explained.
class NonPositivePivot : public NumericalError {
public:
  using NumericalError::NumericalError;
};

/// Malformed input files. `line()` is 0 when no line applies.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class IoError : public Error {
public:
  using Error::Error;
};

} // namespace krigmorph
