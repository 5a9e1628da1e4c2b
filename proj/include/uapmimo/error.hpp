#ifndef UAPMIMO_ERROR_HPP
#define UAPMIMO_ERROR_HPP

#include <stdexcept>
#include <string>

namespace uapmimo {

// Errors are grouped by the CLI exit code they map to:
// ConfigError -> 2, DataError and subclasses -> 3, NumericError and subclasses -> 4.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public DataError {
 public:
  using DataError::DataError;
};

class BoundsInverted : public DataError {
 public:
  using DataError::DataError;
};

class InstanceTooLarge : public DataError {
 public:
  using DataError::DataError;
};

class ZeroMatrix : public DataError {
 public:
  using DataError::DataError;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonConvergence : public NumericError {
 public:
  using NumericError::NumericError;
};

class NonFiniteLoss : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace uapmimo

#endif  // UAPMIMO_ERROR_HPP
