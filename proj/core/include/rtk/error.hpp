#pragma once

#include <stdexcept>
#include <string>

namespace rtk {

// Malformed or inconsistent input: bad files, invalid references, violated
// preconditions. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical procedure failed: non-finite loss, singular system, divergence.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

} // namespace rtk
