#pragma once

#include <stdexcept>
#include <string>

namespace slp {

/// Unsupported modulation order, malformed config value, unknown precoder name.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller passed inconsistent dimensions, non-finite data or an invalid argument.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A matrix that must be positive definite / full rank was not.
class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace slp
