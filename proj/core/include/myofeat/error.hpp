#pragma once

#include <stdexcept>
#include <string>

namespace myofeat {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or missing input data (files, CSV rows, window shapes).
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters passed to an operation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Filter design produced an unusable (unstable) system.
class DesignError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure during optimisation or decomposition.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace myofeat
