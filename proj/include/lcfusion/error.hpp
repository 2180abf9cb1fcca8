#pragma once

#include <stdexcept>
#include <string>

namespace lcfusion {

// Bad input: malformed files, contract violations, inconsistent shapes.
// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Environment failures (I/O). The CLI maps this to exit code 1.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) {
    throw ValidationError(message);
  }
}

}  // namespace detail
}  // namespace lcfusion
