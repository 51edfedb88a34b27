#pragma once

#include <stdexcept>
#include <string>

namespace slipuq {

// Process exit codes used by the command-line tool.
enum class ExitCode : int {
  ok = 0,
  config_error = 2,
  numeric_failure = 3,
  integrity_failure = 4,
};

// Malformed configuration, bad arguments, missing or schema-invalid inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite states, unconverged solvers, degenerate statistics.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Manifest hash mismatches, incomplete ensembles, misaligned artifacts.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace slipuq
