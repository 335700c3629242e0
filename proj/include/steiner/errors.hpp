#pragma once

#include <stdexcept>
#include <string>

namespace steiner {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (dimension mismatch, NaN, empty sets).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid solver or potential parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace steiner
