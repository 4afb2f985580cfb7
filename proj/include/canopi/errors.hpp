#pragma once

#include <stdexcept>
#include <string>

namespace canopi {

// Structural problems in the grid graph (disconnection, islanding outage).
struct StructuralError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Instance data that fails a load-time invariant.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An LP/IP engine returned something other than a usable solution.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace canopi
