#include "hqs/derived.hpp"

#include <cmath>

namespace hqs {

CouplingMHz hybrid_coupling(CouplingMHz g_t, CouplingMHz omega_e) {
  return CouplingMHz(std::hypot(g_t.value, omega_e.value));
}

double cooperativity(CouplingMHz omega_h, RateMHz kappa, RateMHz gamma_te) {
  if (kappa.value == 0.0 || gamma_te.value == 0.0)
    throw DomainError("cooperativity undefined for zero kappa or Gamma_te");
  return 4.0 * omega_h.value * omega_h.value / (kappa.value * gamma_te.value);
}

RateMHz collective_linewidth_from_polariton(RateMHz gamma_h, RateMHz kappa) {
  if (2.0 * gamma_h.value < kappa.value)
    throw DomainError("polariton linewidth below kappa/2 is unphysical");
  return RateMHz(2.0 * gamma_h.value - kappa.value);
}

RateMHz polariton_linewidth(RateMHz kappa, RateMHz gamma) {
  return RateMHz(0.5 * (kappa.value + gamma.value));
}

}  // namespace hqs
