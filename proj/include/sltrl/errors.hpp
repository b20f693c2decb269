#pragma once

#include <stdexcept>
#include <string>

namespace sltrl {

// Process exit codes used by the command-line driver.
enum class ExitCode : int { Ok = 0, Config = 2, Numeric = 3, Io = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Importance weight with a behavior probability below the underflow guard.
class DegenerateWeightError : public NumericError {
 public:
  using NumericError::NumericError;
};

class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sltrl
