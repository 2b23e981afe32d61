#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "hqs/params.hpp"

namespace hqs {

using Complex = std::complex<double>;

// Polariton frequencies (f_r + f_q)/2 -/+ sqrt((f_r - f_q)^2 + 4 g^2)/2, ascending.
std::pair<double, double> jc_polariton_frequencies(double f_r, double f_q, double g);

// (Gamma_-, Gamma_+) with mixing angle tan(2 theta) = 2 g / (f_r - f_q), theta in [0, pi/2]:
//   Gamma_+ = kappa cos^2 + gamma_t sin^2,  Gamma_- = kappa sin^2 + gamma_t cos^2.
std::pair<double, double> jc_polariton_linewidths(double f_r, double f_q, double g, double kappa,
                                                  double gamma_t);

// chi(f_p) = int rho(w) / (w - f_p - i gamma_s / 2) dw and its parameter derivatives.
struct SusceptibilityTerms {
  Complex chi;
  Complex d_f_s;    // d chi / d f_s
  Complex d_width;  // d chi / d Delta
  Complex d_q;      // d chi / d q (zero unless requested)
};

// Ensemble response for one density. Normalization is computed once at
// construction; each evaluation is one adaptive Cauchy-transform quadrature
// (split at the probe frequency, rel. tol 1e-8, tails to 1e-10), or the
// closed form 1/(f_s - f_p - i(gamma_s/2 + Delta)) when q == 2 and the
// lorentzian shortcut is allowed.
class EnsembleSusceptibility {
 public:
  EnsembleSusceptibility(const QGaussianDensity& density, double gamma_s, bool with_q_derivative = false,
                         bool allow_lorentzian_shortcut = false);

  Complex operator()(double f_p) const;
  SusceptibilityTerms terms(double f_p) const;

  const QGaussianDensity& density() const { return density_; }
  bool uses_closed_form() const { return closed_form_; }

 private:
  QGaussianDensity density_;
  double gamma_s_;
  bool with_q_;
  bool closed_form_;
  double area_;
  double dlog_area_dq_;
};

Complex spin_susceptibility(const QGaussianDensity& d, double f_p, double gamma_s);

Complex s21_bare(const SystemParams& p, double f_p);
Complex s21_resonator_qubit(const SystemParams& p, double f_p);
Complex s21_resonator_ensemble(const SystemParams& p, double f_p);
Complex s21_tripartite(const SystemParams& p, double f_p);

// 1 / (f_r - f_p - i kappa/2 - g_t^2 / (f_t - f_p - i gamma_t/2) - omega_e^2 chi), the
// common denominator form shared by all models; pass chi = 0 to drop the ensemble.
Complex s21_from_susceptibility(const SystemParams& p, double f_p, Complex chi, bool with_transmon);

enum class SpectrumModel { bare, jc, ensemble, tripartite };

SpectrumModel parse_spectrum_model(const std::string& name);
std::string to_string(SpectrumModel model);

// Evaluates a model on a probe grid with the density normalized once.
Eigen::VectorXcd s21_trace(SpectrumModel model, const SystemParams& p, const Eigen::VectorXd& freqs);

struct Spectrum {
  Eigen::VectorXd freqs;  // strictly ascending, MHz
  Eigen::VectorXcd s21;
  std::string model;
  SystemParams params;

  Eigen::VectorXd power() const { return s21.cwiseAbs2(); }
  // 10 log10(|S21|^2 / max), unfloored.
  Eigen::VectorXd normalized_db() const;
};

Eigen::VectorXd uniform_grid(double f_min, double f_max, int n_points);

// Throws DomainError unless f_min < f_max and n_points >= 2.
Spectrum compute_spectrum(SpectrumModel model, const SystemParams& p, double f_min, double f_max,
                          int n_points);

// 10 log10(power / max), clipped below at floor_db.
Eigen::VectorXd to_normalized_db(const Eigen::VectorXd& power, double floor_db = -60.0);

// Dressed one-excitation energies per sweep column with the resonator weight
// |<1gG|k>|^2 of each eigenstate. Rows are sweep columns.
struct BranchOverlay {
  std::vector<double> f_t;
  Eigen::MatrixXd energies;
  Eigen::MatrixXd resonator_weight;
};

BranchOverlay single_excitation_branches(const SystemParams& p, const std::vector<double>& f_t_values);
BranchOverlay hyperfine_branches(const SystemParams& p, const std::vector<double>& f_t_values);

struct SweepGrid {
  std::vector<double> sweep_values;  // f_t per column (or a bias value for measured data)
  Eigen::VectorXd freqs;             // probe grid
  Eigen::MatrixXd magnitude_db;      // freqs.size() x sweep_values.size(), per-column normalized
  BranchOverlay branches;
};

// Tripartite transmission per f_t column (per-column normalized dB, -60 dB
// floor) plus the eigen-branch overlay. The ensemble susceptibility depends
// only on the probe frequency and is evaluated once per probe point.
SweepGrid sweep_transmon(const SystemParams& p, const std::vector<double>& f_t_values,
                         const Eigen::VectorXd& freqs, bool hyperfine_overlay = false);

// Linear |S21|^2 map (same layout as SweepGrid::magnitude_db), columns normalized to max 1.
Eigen::MatrixXd sweep_power(const SystemParams& p, const std::vector<double>& f_t_values,
                            const Eigen::VectorXd& freqs);

}  // namespace hqs
