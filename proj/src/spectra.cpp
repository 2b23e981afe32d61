#include "hqs/spectra.hpp"

#include <cmath>
#include <numbers>
#include <optional>
#include <sstream>

#include "hqs/hamiltonian.hpp"
#include "hqs/quadrature.hpp"

namespace hqs {
namespace {

constexpr Complex kI{0.0, 1.0};

CauchyOptions cauchy_options(double q) {
  CauchyOptions opts;
  opts.core_half_width = 200.0;
  opts.window = 1.0;
  opts.rel_tol = 1e-8;
  opts.tail_rel = 1e-10;
  opts.support = qgaussian_support(q);
  return opts;
}

}  // namespace

std::pair<double, double> jc_polariton_frequencies(double f_r, double f_q, double g) {
  if (g < 0.0) throw DomainError("coupling must be non-negative");
  const double mean = 0.5 * (f_r + f_q);
  const double half_split = 0.5 * std::sqrt((f_r - f_q) * (f_r - f_q) + 4.0 * g * g);
  return {mean - half_split, mean + half_split};
}

std::pair<double, double> jc_polariton_linewidths(double f_r, double f_q, double g, double kappa,
                                                  double gamma_t) {
  if (g < 0.0) throw DomainError("coupling must be non-negative");
  const double theta = 0.5 * std::atan2(2.0 * g, f_r - f_q);
  const double c2 = std::cos(theta) * std::cos(theta);
  const double s2 = std::sin(theta) * std::sin(theta);
  return {kappa * s2 + gamma_t * c2, kappa * c2 + gamma_t * s2};
}

EnsembleSusceptibility::EnsembleSusceptibility(const QGaussianDensity& density, double gamma_s,
                                               bool with_q_derivative, bool allow_lorentzian_shortcut)
    : density_(density),
      gamma_s_(gamma_s),
      with_q_(with_q_derivative),
      closed_form_(allow_lorentzian_shortcut && density.q == 2.0 && !with_q_derivative) {
  if (gamma_s < 0.0) throw DomainError("gamma_s must be non-negative");
  if (closed_form_) {
    area_ = std::numbers::pi;
    dlog_area_dq_ = 0.0;
  } else {
    const auto norm = normalize_qgaussian_shape(density.q, with_q_);
    area_ = norm.area;
    dlog_area_dq_ = norm.dlog_area_dq;
  }
}

Complex EnsembleSusceptibility::operator()(double f_p) const {
  const double width = density_.width;
  const Complex s = (f_p - density_.f_center.value + kI * (0.5 * gamma_s_)) / width;
  if (closed_form_) return -1.0 / ((s + kI) * width);

  const double q = density_.q;
  auto shape = [q](double u) { return Eigen::Matrix<double, 1, 1>(qgaussian_shape(u, q)); };
  auto res = cauchy_transform<1>(shape, s, cauchy_options(q));
  if (!res.converged) {
    std::ostringstream msg;
    msg << "spin susceptibility quadrature did not converge at f_p = " << f_p
        << " (achieved error " << res.error << ")";
    throw ConvergenceError(msg.str());
  }
  // chi = rho0 * int U / (u - s) du with rho0 = 1 / (width * area)
  return res.value[0] / (width * area_);
}

SusceptibilityTerms EnsembleSusceptibility::terms(double f_p) const {
  const double width = density_.width;
  const Complex s = (f_p - density_.f_center.value + kI * (0.5 * gamma_s_)) / width;

  // F(s) = int N / (u - s), F'(s) = int N' / (u - s), with N the unit-area shape.
  Complex f_val;
  Complex f_prime;
  Complex f_q{0.0, 0.0};
  if (closed_form_) {
    f_val = -1.0 / (s + kI);
    f_prime = 1.0 / ((s + kI) * (s + kI));
  } else {
    const double q = density_.q;
    const double dlog_area = dlog_area_dq_;
    const bool with_q = with_q_;
    auto g = [q, dlog_area, with_q](double u) {
      const double shape = qgaussian_shape(u, q);
      Eigen::Vector3d v;
      v[0] = shape;
      v[1] = shape > 0.0 ? shape * qgaussian_shape_dlog_du(u, q) : 0.0;
      v[2] = (with_q && shape > 0.0) ? shape * (qgaussian_shape_dlog_dq(u, q) - dlog_area) : 0.0;
      return v;
    };
    auto res = cauchy_transform<3>(g, s, cauchy_options(q));
    if (!res.converged) {
      std::ostringstream msg;
      msg << "spin susceptibility quadrature did not converge at f_p = " << f_p
          << " (achieved error " << res.error << ")";
      throw ConvergenceError(msg.str());
    }
    f_val = res.value[0] / area_;
    f_prime = res.value[1] / area_;
    f_q = res.value[2] / area_;
  }

  SusceptibilityTerms t;
  t.chi = f_val / width;
  t.d_f_s = -f_prime / (width * width);
  t.d_width = -(f_val + s * f_prime) / (width * width);
  t.d_q = f_q / width;
  return t;
}

Complex spin_susceptibility(const QGaussianDensity& d, double f_p, double gamma_s) {
  return EnsembleSusceptibility(d, gamma_s)(f_p);
}

Complex s21_from_susceptibility(const SystemParams& p, double f_p, Complex chi, bool with_transmon) {
  Complex denom = p.f_r - f_p - kI * (0.5 * p.kappa);
  if (with_transmon && p.g_t != 0.0) denom -= p.g_t * p.g_t / (p.f_t - f_p - kI * (0.5 * p.gamma_t));
  if (p.omega_e != 0.0) denom -= p.omega_e * p.omega_e * chi;
  return 1.0 / denom;
}

Complex s21_bare(const SystemParams& p, double f_p) {
  return 1.0 / (p.f_r - f_p - kI * (0.5 * p.kappa));
}

Complex s21_resonator_qubit(const SystemParams& p, double f_p) {
  return s21_from_susceptibility(p, f_p, 0.0, true);
}

Complex s21_resonator_ensemble(const SystemParams& p, double f_p) {
  const Complex chi = p.omega_e != 0.0 ? spin_susceptibility(p.density(), f_p, p.gamma_s) : Complex{};
  return s21_from_susceptibility(p, f_p, chi, false);
}

Complex s21_tripartite(const SystemParams& p, double f_p) {
  const Complex chi = p.omega_e != 0.0 ? spin_susceptibility(p.density(), f_p, p.gamma_s) : Complex{};
  return s21_from_susceptibility(p, f_p, chi, true);
}

SpectrumModel parse_spectrum_model(const std::string& name) {
  if (name == "bare") return SpectrumModel::bare;
  if (name == "jc") return SpectrumModel::jc;
  if (name == "ensemble") return SpectrumModel::ensemble;
  if (name == "tripartite") return SpectrumModel::tripartite;
  throw DomainError("unknown spectrum model '" + name + "'");
}

std::string to_string(SpectrumModel model) {
  switch (model) {
    case SpectrumModel::bare: return "bare";
    case SpectrumModel::jc: return "jc";
    case SpectrumModel::ensemble: return "ensemble";
    case SpectrumModel::tripartite: return "tripartite";
  }
  return "unknown";
}

Eigen::VectorXcd s21_trace(SpectrumModel model, const SystemParams& p, const Eigen::VectorXd& freqs) {
  Eigen::VectorXcd out(freqs.size());
  const bool needs_ensemble =
      (model == SpectrumModel::ensemble || model == SpectrumModel::tripartite) && p.omega_e != 0.0;
  std::optional<EnsembleSusceptibility> chi;
  if (needs_ensemble) chi.emplace(p.density(), p.gamma_s);

  for (Eigen::Index i = 0; i < freqs.size(); ++i) {
    const double f = freqs[i];
    switch (model) {
      case SpectrumModel::bare: out[i] = s21_bare(p, f); break;
      case SpectrumModel::jc: out[i] = s21_resonator_qubit(p, f); break;
      case SpectrumModel::ensemble:
        out[i] = s21_from_susceptibility(p, f, chi ? (*chi)(f) : Complex{}, false);
        break;
      case SpectrumModel::tripartite:
        out[i] = s21_from_susceptibility(p, f, chi ? (*chi)(f) : Complex{}, true);
        break;
    }
  }
  return out;
}

Eigen::VectorXd Spectrum::normalized_db() const {
  const Eigen::VectorXd pw = power();
  const double peak = pw.maxCoeff();
  return (pw / peak).array().log10() * 10.0;
}

Eigen::VectorXd uniform_grid(double f_min, double f_max, int n_points) {
  if (!(f_min < f_max)) throw DomainError("frequency grid requires f_min < f_max");
  if (n_points < 2) throw DomainError("frequency grid requires at least 2 points");
  Eigen::VectorXd g(n_points);
  for (int i = 0; i < n_points; ++i) g[i] = f_min + (f_max - f_min) * i / (n_points - 1);
  g[n_points - 1] = f_max;
  return g;
}

Spectrum compute_spectrum(SpectrumModel model, const SystemParams& p, double f_min, double f_max,
                          int n_points) {
  Spectrum s;
  s.freqs = uniform_grid(f_min, f_max, n_points);
  s.s21 = s21_trace(model, p, s.freqs);
  s.model = to_string(model);
  s.params = p;
  return s;
}

Eigen::VectorXd to_normalized_db(const Eigen::VectorXd& power, double floor_db) {
  const double peak = power.maxCoeff();
  Eigen::VectorXd db(power.size());
  for (Eigen::Index i = 0; i < power.size(); ++i) {
    const double ratio = power[i] / peak;
    db[i] = ratio > 0.0 ? std::max(floor_db, 10.0 * std::log10(ratio)) : floor_db;
  }
  return db;
}

BranchOverlay single_excitation_branches(const SystemParams& p, const std::vector<double>& f_t_values) {
  BranchOverlay b;
  b.f_t = f_t_values;
  const auto n = static_cast<Eigen::Index>(f_t_values.size());
  b.energies.resize(n, 3);
  b.resonator_weight.resize(n, 3);
  SystemParams col = p;
  for (Eigen::Index i = 0; i < n; ++i) {
    col.f_t = f_t_values[static_cast<std::size_t>(i)];
    const auto sol = eigendecompose(build_single_excitation(col));
    b.energies.row(i) = sol.eigenvalues.transpose();
    b.resonator_weight.row(i) = sol.eigenvectors.row(0).cwiseAbs2();
  }
  return b;
}

BranchOverlay hyperfine_branches(const SystemParams& p, const std::vector<double>& f_t_values) {
  BranchOverlay b;
  b.f_t = f_t_values;
  const auto n = static_cast<Eigen::Index>(f_t_values.size());
  b.energies.resize(n, 5);
  b.resonator_weight.resize(n, 5);
  SystemParams col = p;
  for (Eigen::Index i = 0; i < n; ++i) {
    col.f_t = f_t_values[static_cast<std::size_t>(i)];
    const auto sol = hyperfine_manifold(col, 1);
    b.energies.row(i) = sol.eigenvalues.transpose();
    // Resonator is the first one-excitation state.
    b.resonator_weight.row(i) = sol.eigenvectors.row(0).cwiseAbs2();
  }
  return b;
}

Eigen::MatrixXd sweep_power(const SystemParams& p, const std::vector<double>& f_t_values,
                            const Eigen::VectorXd& freqs) {
  if (f_t_values.empty() || freqs.size() == 0) throw DomainError("sweep requires non-empty axes");
  Eigen::VectorXcd chi = Eigen::VectorXcd::Zero(freqs.size());
  if (p.omega_e != 0.0) {
    const EnsembleSusceptibility response(p.density(), p.gamma_s);
    for (Eigen::Index i = 0; i < freqs.size(); ++i) chi[i] = response(freqs[i]);
  }
  Eigen::MatrixXd power(freqs.size(), static_cast<Eigen::Index>(f_t_values.size()));
  SystemParams col = p;
  for (std::size_t c = 0; c < f_t_values.size(); ++c) {
    col.f_t = f_t_values[c];
    auto column = power.col(static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < freqs.size(); ++i)
      column[i] = std::norm(s21_from_susceptibility(col, freqs[i], chi[i], true));
    column /= column.maxCoeff();
  }
  return power;
}

SweepGrid sweep_transmon(const SystemParams& p, const std::vector<double>& f_t_values,
                         const Eigen::VectorXd& freqs, bool hyperfine_overlay) {
  SweepGrid grid;
  grid.sweep_values = f_t_values;
  grid.freqs = freqs;
  const Eigen::MatrixXd power = sweep_power(p, f_t_values, freqs);
  grid.magnitude_db.resize(power.rows(), power.cols());
  for (Eigen::Index c = 0; c < power.cols(); ++c) grid.magnitude_db.col(c) = to_normalized_db(power.col(c));
  grid.branches = hyperfine_overlay ? hyperfine_branches(p, f_t_values)
                                    : single_excitation_branches(p, f_t_values);
  return grid;
}

}  // namespace hqs
