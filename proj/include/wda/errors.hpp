#ifndef WDA_ERRORS_HPP_
#define WDA_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace wda {

// Bad call arguments (out-of-range ratio, shape mismatch between inputs, ...).
class ArgumentError : public std::invalid_argument {
 public:
  explicit ArgumentError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Data that violates a documented invariant (non-simplex probabilities,
// image/label stack mismatch, incompatible checkpoint, ...).
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Filesystem / decode failures. Message always carries the offending path.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Synthetic generation gave up; message names the spec field at fault.
class GenerationError : public std::runtime_error {
 public:
  explicit GenerationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Run-time config problems (unknown TOML keys, invalid field values).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite loss during optimization.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace wda

#endif  // WDA_ERRORS_HPP_
