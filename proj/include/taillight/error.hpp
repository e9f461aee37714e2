#pragma once

#include <stdexcept>
#include <string>

namespace taillight {

// Incompatible tensor extents, bad configuration geometry.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Unreadable, malformed or inconsistent files and datasets.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf or divergence.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration keys/values or command-line usage.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace taillight
