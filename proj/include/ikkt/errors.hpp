#pragma once

#include <stdexcept>
#include <string>

namespace ikkt {

// Malformed input or inconsistent configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A QP or MIP that should be solvable was not.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The constraint program has no feasible point.
struct MipInfeasible : SolverError {
  using SolverError::SolverError;
};

struct InsufficientInactiveData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace ikkt
