#pragma once

#include <stdexcept>
#include <string>

namespace wqed {

// Bad user input: maps to CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Singular/ill-conditioned/unconverged numerics: exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A checked physical invariant failed: exit code 4.
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace wqed
