#pragma once

#include <stdexcept>
#include <string>

namespace credgraph {

/// Base class for all credgraph errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or invalid argument values (CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or out-of-contract input data (CLI exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Structural mismatch: wrong column counts, conflicting node types,
/// missing relation parameters (CLI exit code 3).
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between tensors or feature tables.
class ShapeError : public SchemaError {
 public:
  using SchemaError::SchemaError;
};

/// Training failure, e.g. divergence to a non-finite loss (CLI exit code 4).
class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace credgraph
