#include "hqs/params.hpp"

#include <cmath>
#include <string>

namespace hqs {
namespace {

void require(bool ok, std::string_view key, const char* what) {
  if (!ok) throw DomainError(std::string(key) + ": " + what);
}

double* field(SystemParams& p, std::string_view key) {
  if (key == "f_r") return &p.f_r;
  if (key == "kappa") return &p.kappa;
  if (key == "f_t") return &p.f_t;
  if (key == "gamma_t") return &p.gamma_t;
  if (key == "anharm_delta") return &p.anharm_delta;
  if (key == "f_s") return &p.f_s;
  if (key == "gamma_s") return &p.gamma_s;
  if (key == "g_t") return &p.g_t;
  if (key == "omega_e") return &p.omega_e;
  if (key == "q") return &p.q;
  if (key == "width") return &p.width;
  if (key == "hyperfine_alpha") return &p.hyperfine_alpha;
  return nullptr;
}

}  // namespace

void SystemParams::validate() const {
  for (auto key : kSystemParamKeys) {
    require(std::isfinite(get_param(*this, key)), key, "must be finite");
  }
  require(f_r > 0.0, "f_r", "must be > 0");
  require(f_t > 0.0, "f_t", "must be > 0");
  require(f_s > 0.0, "f_s", "must be > 0");
  require(kappa >= 0.0, "kappa", "must be >= 0");
  require(gamma_t >= 0.0, "gamma_t", "must be >= 0");
  require(gamma_s >= 0.0, "gamma_s", "must be >= 0");
  require(g_t >= 0.0, "g_t", "must be >= 0");
  require(omega_e >= 0.0, "omega_e", "must be >= 0");
  require(width > 0.0, "width", "must be > 0");
  require(q >= 1.0 && q < 3.0, "q", "must lie in [1, 3)");
}

QGaussianDensity SystemParams::density() const {
  return qgaussian_normalize(FrequencyMHz(f_s), width, q);
}

bool is_system_param_key(std::string_view key) {
  for (auto k : kSystemParamKeys)
    if (k == key) return true;
  return false;
}

double get_param(const SystemParams& p, std::string_view key) {
  auto* f = field(const_cast<SystemParams&>(p), key);
  if (!f) throw DomainError("unknown parameter '" + std::string(key) + "'");
  return *f;
}

void set_param(SystemParams& p, std::string_view key, double value) {
  auto* f = field(p, key);
  if (!f) throw DomainError("unknown parameter '" + std::string(key) + "'");
  *f = value;
}

double characterized_ensemble_width() { return qgaussian_width_from_fwhm(3.434, 1.9591); }

SystemParams characterized_jc_params() {
  SystemParams p;
  p.f_r = 3007.036;
  p.f_t = 3007.036;
  p.g_t = 17.490;
  p.gamma_t = 3.952;
  p.kappa = 0.171;
  p.omega_e = 0.0;
  p.f_s = 3500.0;
  p.width = characterized_ensemble_width();
  return p;
}

SystemParams characterized_ensemble_params() {
  SystemParams p;
  p.f_r = 3002.001;
  p.f_s = 3001.185;
  p.omega_e = 6.597;
  p.q = 1.9591;
  p.width = characterized_ensemble_width();
  p.gamma_s = 0.001;
  p.kappa = 0.171;
  p.g_t = 0.0;
  p.f_t = 3230.0;
  return p;
}

SystemParams triple_resonance_params() {
  SystemParams p;
  p.f_r = p.f_t = p.f_s = 3001.2;
  p.width = characterized_ensemble_width();
  return p;
}

}  // namespace hqs
