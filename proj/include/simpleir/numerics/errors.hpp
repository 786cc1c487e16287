#pragma once

#include <stdexcept>
#include <string>

namespace simpleir {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A tensor axis or image dimension does not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value (groups, channel split, fractions, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced or consumed by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Caller broke an API precondition (non-scalar loss, missing stats, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Missing file, malformed manifest, unknown sample id.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Unsupported or corrupted file format.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// File written by an incompatible format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

}  // namespace simpleir
