#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hqs/least_squares.hpp"
#include "hqs/params.hpp"
#include "hqs/spectra.hpp"

namespace hqs {

// A named-parameter model of a linear power trace. predict and jacobian take
// the full parameter vector (all names, fixed ones included); jacobian has one
// column per name.
struct FitModel {
  std::string model;
  std::vector<std::string> names;
  Eigen::VectorXd init;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Eigen::VectorXd scale;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> predict;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> jacobian;
};

struct FitOptions {
  // Parameter names held at their initial values; unset means the model's
  // default mask. Unknown names raise ConfigError.
  std::optional<std::vector<std::string>> fixed;
  LeastSquaresOptions solver;
  // Use central differences instead of the analytic Jacobian.
  bool numeric_jacobian = false;
};

// Fits model to data, honouring the fixed mask.
FitResult run_fit(const FitModel& model, const Eigen::VectorXd& data, const FitOptions& opts = {});

// Sum of Lorentzians amplitude_k (w_k/2)^2 / ((f - center_k)^2 + (w_k/2)^2).
// Parameters center1, fwhm1, amplitude1, center2, ...
FitModel lorentzian_model(const Eigen::VectorXd& freqs, const std::vector<double>& centers,
                          const std::vector<double>& fwhms, const std::vector<double>& amplitudes);

// Initializes from find_peaks (prominence 0.05) on the data; surplus peaks
// start at the largest residual of the initial model with a small amplitude.
FitResult fit_lorentzians(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, int n_peaks,
                          const FitOptions& opts = {});
FitResult fit_lorentzians(const Spectrum& s, int n_peaks, const FitOptions& opts = {});

// scale * |s21_resonator_qubit|^2 over f_r, f_t, g_t, gamma_t, kappa, scale.
FitModel jc_model(const Eigen::VectorXd& freqs, const SystemParams& init, double scale = 1.0);

// Default mask: kappa fixed.
FitResult fit_jc(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, const SystemParams& init,
                 const FitOptions& opts = {});
FitResult fit_jc(const Spectrum& s, const SystemParams& init, const FitOptions& opts = {});

// scale * |s21_resonator_ensemble|^2 over f_r, f_s, omega_e, width, q, kappa, scale.
// gamma_s is never fitted. When q is fixed at exactly 2 the closed-form
// Lorentzian susceptibility is used.
FitModel ensemble_model(const Eigen::VectorXd& freqs, const SystemParams& init, double scale = 1.0,
                        bool q_fixed = false);

// Default mask: kappa fixed. Adds extra["fwhm_rho"].
FitResult fit_ensemble(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, const SystemParams& init,
                       const FitOptions& opts = {});
FitResult fit_ensemble(const Spectrum& s, const SystemParams& init, const FitOptions& opts = {});

}  // namespace hqs
