#pragma once

#include <stdexcept>
#include <string>

namespace kgm {

/// Invalid inputs: bad grid extents, inadmissible parameters, malformed config.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative procedure did not reach its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kgm
