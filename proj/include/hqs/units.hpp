#pragma once

#include <cmath>
#include <compare>
#include <string>

#include "hqs/errors.hpp"

namespace hqs {

// All frequencies, rates and couplings are omega/2pi in MHz (hbar = 1).
// Rates are FWHM and enter complex detunings as -i*rate/2.

struct FrequencyMHz {
  double value = 0.0;

  constexpr FrequencyMHz() = default;
  explicit FrequencyMHz(double v) : value(v) {
    if (!std::isfinite(v)) throw DomainError("frequency must be finite");
  }
  auto operator<=>(const FrequencyMHz&) const = default;
};

struct RateMHz {
  double value = 0.0;

  constexpr RateMHz() = default;
  explicit RateMHz(double v) : value(v) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("rate must be finite and non-negative");
  }
  auto operator<=>(const RateMHz&) const = default;
};

struct CouplingMHz {
  double value = 0.0;

  constexpr CouplingMHz() = default;
  explicit CouplingMHz(double v) : value(v) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("coupling must be finite and non-negative");
  }
  auto operator<=>(const CouplingMHz&) const = default;
};

}  // namespace hqs
