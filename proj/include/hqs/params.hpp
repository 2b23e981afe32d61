#pragma once

#include <array>
#include <string_view>

#include "hqs/qgaussian.hpp"

namespace hqs {

// Every mode frequency, rate, coupling and broadening constant of the
// resonator + transmon + spin-ensemble system, in MHz (q is dimensionless).
// The ensemble density is centred on f_s by construction.
struct SystemParams {
  double f_r = 3001.2;           // bus resonator
  double kappa = 0.171;          // resonator FWHM
  double f_t = 3001.2;           // transmon 0-1 transition
  double gamma_t = 3.952;        // transmon FWHM
  double anharm_delta = -203.1;  // transmon anharmonicity (signed)
  double f_s = 3001.2;           // ensemble centre
  double gamma_s = 0.001;        // homogeneous spin linewidth
  double g_t = 17.490;           // bus-transmon coupling
  double omega_e = 6.597;        // collective bus-ensemble coupling
  double width = 1.7306;         // q-Gaussian Delta
  double q = 1.9591;             // q-Gaussian shape
  double hyperfine_alpha = 2.2;  // 14N hyperfine spacing

  // Throws DomainError naming the offending field.
  void validate() const;

  // Unit-area density centred on f_s (quadrature normalization, not cached).
  QGaussianDensity density() const;

  bool operator==(const SystemParams&) const = default;
};

inline constexpr std::array<std::string_view, 12> kSystemParamKeys = {
    "f_r", "kappa", "f_t", "gamma_t", "anharm_delta", "f_s",
    "gamma_s", "g_t", "omega_e", "q", "width", "hyperfine_alpha"};

bool is_system_param_key(std::string_view key);
double get_param(const SystemParams& p, std::string_view key);
void set_param(SystemParams& p, std::string_view key, double value);

// Ensemble density width that reproduces a measured FWHM of 3.434 MHz at q = 1.9591.
double characterized_ensemble_width();

// Bus-transmon characterization: f_r = f_q = 3007.036, g_t = 17.490,
// gamma_t = 3.952, kappa = 0.171, ensemble decoupled (omega_e = 0).
SystemParams characterized_jc_params();

// Bus-ensemble characterization: f_r = 3002.001, f_s = 3001.185,
// omega_e = 6.597, q = 1.9591, gamma_s = 0.001, transmon decoupled (g_t = 0).
SystemParams characterized_ensemble_params();

// All three modes at 3001.2 MHz with the characterized couplings and rates.
SystemParams triple_resonance_params();

}  // namespace hqs
