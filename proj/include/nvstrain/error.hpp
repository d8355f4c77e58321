#pragma once

#include <stdexcept>
#include <string>

namespace nvstrain {

// Raised for invalid inputs (non-finite values, out-of-range parameters,
// wrong tensor frame, malformed samples).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a fit cannot be seeded or inverted.
class FitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nvstrain
