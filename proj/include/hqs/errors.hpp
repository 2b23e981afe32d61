#pragma once

#include <stdexcept>
#include <string>

namespace hqs {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input outside the mathematical domain of an operation (e.g. 2*Gamma_h < kappa).
struct DomainError : Error {
  using Error::Error;
};

// Caller broke a documented precondition (e.g. triple resonance not satisfied).
struct PreconditionError : Error {
  using Error::Error;
};

// An iterative numerical method failed to reach its tolerance.
struct ConvergenceError : Error {
  using Error::Error;
};

struct ResourceError : Error {
  using Error::Error;
};

// Bad configuration or input file. Message names the offending key or line.
struct ConfigError : Error {
  using Error::Error;
};

// Stepwise estimation could not proceed (too few branches, gaps in the sweep).
struct EstimationError : Error {
  using Error::Error;
};

}  // namespace hqs
