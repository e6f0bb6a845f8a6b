#pragma once

#include <stdexcept>
#include <string>

namespace cdgan {

// Process exit codes used by the CLI. Library code throws the matching
// exception type; main() maps it to the code.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitRuntime = 3,
};

// Bad command line, bad config file, unknown config key.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Missing/undecodable dataset files, empty datasets, bad checkpoints.
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape mismatches and other violated operation contracts.
struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf detected where the engine requires finite values.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace cdgan
