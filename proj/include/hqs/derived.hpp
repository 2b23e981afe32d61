#pragma once

#include "hqs/units.hpp"

namespace hqs {

// Coupling of the bus to the bright transmon-ensemble mode, sqrt(g_t^2 + Omega_e^2).
CouplingMHz hybrid_coupling(CouplingMHz g_t, CouplingMHz omega_e);

// C = 4 Omega_h^2 / (kappa * Gamma_te). Throws DomainError if either rate is zero.
double cooperativity(CouplingMHz omega_h, RateMHz kappa, RateMHz gamma_te);

// Gamma_te = 2 Gamma_h - kappa, inverting Gamma_h = (kappa + Gamma_te) / 2.
RateMHz collective_linewidth_from_polariton(RateMHz gamma_h, RateMHz kappa);

// Mean polariton linewidth (kappa + Gamma) / 2 for a resonant bus-mode doublet.
RateMHz polariton_linewidth(RateMHz kappa, RateMHz gamma);

}  // namespace hqs
