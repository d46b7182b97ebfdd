#pragma once

#include <stdexcept>
#include <string>

namespace hpot {

// Bad input: malformed files, violated preconditions, unknown names.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation that could not produce a usable answer (non-convergence,
// non-finite posterior, plug-in outside support).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hpot
