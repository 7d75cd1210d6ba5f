#pragma once

#include <stdexcept>
#include <string>

namespace brl {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested partition move would break the no-within-database-duplicates rule.
class ConstraintError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters, schema, or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A covariance block failed to factorize.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace brl
