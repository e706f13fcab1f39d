#pragma once

#include <stdexcept>
#include <string>

namespace gogan {

// Base of every error thrown by the library. The CLI maps the concrete
// type onto its exit code (see experiment.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// API misuse: wrong tape, frozen/unfrozen stage, mismatched batches.
class UsageError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or configuration value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; the message names the file and byte offset.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Well-formed files that disagree with each other (e.g. mixed image sizes).
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gogan
