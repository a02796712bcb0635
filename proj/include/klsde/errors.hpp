#pragma once

#include <stdexcept>
#include <string>

namespace klsde {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit together.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Input values violate a precondition (non-finite entries, bad counts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Iterative kernel failed to converge or produced unusable output.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Linear (matrix) equation is singular or too close to singular.
class SingularityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// A bound's hypotheses fail for the given data.
class BoundUnavailableError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A sampling strategy cannot be used for the given problem.
class StrategyError : public Error {
 public:
  using Error::Error;
};

/// Malformed experiment configuration or command line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace klsde
