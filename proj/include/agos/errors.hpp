#pragma once

#include <stdexcept>
#include <string>

namespace agos {

// Numeric failures: non-finite values, failed gradient checks, degenerate solves.
// The CLI maps these to exit code 2.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// File-format and filesystem failures. The CLI maps these to exit code 3.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments (shape mismatches, invalid config values) map to exit code 1.
using UsageError = std::invalid_argument;

}  // namespace agos
