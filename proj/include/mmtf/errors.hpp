#pragma once

#include <stdexcept>
#include <string>

namespace mmtf {

// Root of every error raised by the library. Each subclass maps onto one
// failure class the CLI reports with a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or an invalid axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Class index or label string outside its vocabulary.
class LabelError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed files: PGM images, dataset records, checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A dataset record or config line that does not parse; the message carries
// the file and line number.
class ParseError : public FormatError {
 public:
  using FormatError::FormatError;
};

// NaN / Inf where a finite value is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Unknown or unparsable configuration key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A function expected to be deterministic produced two different values.
class DeterminismError : public Error {
 public:
  using Error::Error;
};

}  // namespace mmtf
