#pragma once

#include <stdexcept>
#include <string>

namespace evodyn {

// Malformed or out-of-contract input (bad config, invalid measure, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Integration or solver breakdown: step-size underflow, NaN, large negative mass.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace evodyn
