#pragma once

#include <stdexcept>
#include <string>

namespace awb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor/image shapes that do not line up.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced or consumed, or a solve that cannot proceed.
class NumericError : public Error {
 public:
  using Error::Error;
};

class SingularFitError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Invalid configuration values or incompatible config/checkpoint pairs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized payloads (checkpoints, mapping caches).
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace awb
