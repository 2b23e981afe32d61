#include "hqs/fits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

#include "hqs/errors.hpp"
#include "hqs/peaks.hpp"

namespace hqs {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr Complex kI{0.0, 1.0};

Eigen::Index index_of(const std::vector<std::string>& names, const std::string& name) {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Eigen::Index>(it - names.begin());
}

// Least-squares optimal overall scale of shape against data.
double best_scale(const Eigen::VectorXd& shape, const Eigen::VectorXd& data) {
  const double denom = shape.squaredNorm();
  const double s = denom > 0.0 ? shape.dot(data) / denom : 1.0;
  return s > 0.0 ? s : 1.0;
}

// d|1/D|^2 / d theta = -2 Re(conj(D) dD) / |D|^4
double power_derivative(Complex d, Complex dd) {
  const double n2 = std::norm(d);
  return -2.0 * std::real(std::conj(d) * dd) / (n2 * n2);
}

std::vector<std::string> default_mask(const FitOptions& opts, std::vector<std::string> fallback) {
  return opts.fixed ? *opts.fixed : std::move(fallback);
}

}  // namespace

FitResult run_fit(const FitModel& model, const Eigen::VectorXd& data, const FitOptions& opts) {
  const Eigen::Index n_all = static_cast<Eigen::Index>(model.names.size());
  if (data.size() == 0) throw PreconditionError("fit: empty data");
  if (!data.allFinite()) throw DomainError("fit: data contain non-finite values");

  std::vector<bool> is_fixed(static_cast<std::size_t>(n_all), false);
  if (opts.fixed) {
    for (const auto& name : *opts.fixed) {
      const Eigen::Index j = index_of(model.names, name);
      if (j < 0) throw ConfigError("cannot fix unknown parameter '" + name + "' of model " + model.model);
      is_fixed[static_cast<std::size_t>(j)] = true;
    }
  }
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index j = 0; j < n_all; ++j)
    if (!is_fixed[static_cast<std::size_t>(j)]) free_idx.push_back(j);
  const auto n_free = static_cast<Eigen::Index>(free_idx.size());
  if (n_free == 0) throw ConfigError("every parameter of model " + model.model + " is fixed");

  auto expand = [&model, &free_idx](const Eigen::VectorXd& x) {
    Eigen::VectorXd full = model.init;
    for (std::size_t k = 0; k < free_idx.size(); ++k) full[free_idx[k]] = x[static_cast<Eigen::Index>(k)];
    return full;
  };

  LeastSquaresProblem problem;
  problem.lower.resize(n_free);
  problem.upper.resize(n_free);
  problem.scale.resize(n_free);
  Eigen::VectorXd x0(n_free);
  for (Eigen::Index k = 0; k < n_free; ++k) {
    const Eigen::Index j = free_idx[static_cast<std::size_t>(k)];
    problem.names.push_back(model.names[static_cast<std::size_t>(j)]);
    problem.lower[k] = model.lower[j];
    problem.upper[k] = model.upper[j];
    problem.scale[k] = model.scale[j];
    x0[k] = std::clamp(model.init[j], model.lower[j], model.upper[j]);
  }
  problem.residuals = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    Eigen::VectorXd pred = model.predict(expand(x));
    if (pred.size() != data.size()) throw PreconditionError("fit: model and data sizes differ");
    return pred - data;
  };
  if (!opts.numeric_jacobian && model.jacobian) {
    problem.jacobian = [&](const Eigen::VectorXd& x) -> Eigen::MatrixXd {
      const Eigen::MatrixXd full = model.jacobian(expand(x));
      Eigen::MatrixXd out(full.rows(), n_free);
      for (Eigen::Index k = 0; k < n_free; ++k) out.col(k) = full.col(free_idx[static_cast<std::size_t>(k)]);
      return out;
    };
  }

  FitResult result = least_squares(problem, x0, opts.solver);
  result.model = model.model;
  for (Eigen::Index j = 0; j < n_all; ++j)
    if (is_fixed[static_cast<std::size_t>(j)]) result.fixed[model.names[static_cast<std::size_t>(j)]] = model.init[j];
  return result;
}

FitModel lorentzian_model(const Eigen::VectorXd& freqs, const std::vector<double>& centers,
                          const std::vector<double>& fwhms, const std::vector<double>& amplitudes) {
  const std::size_t k_peaks = centers.size();
  if (k_peaks == 0 || fwhms.size() != k_peaks || amplitudes.size() != k_peaks)
    throw PreconditionError("lorentzian_model: inconsistent peak lists");
  if (freqs.size() < 2) throw PreconditionError("lorentzian_model: need at least two points");
  const double f_lo = freqs.minCoeff();
  const double f_hi = freqs.maxCoeff();
  const double span = f_hi - f_lo;
  const double step = span / static_cast<double>(freqs.size() - 1);

  FitModel m;
  m.model = "lorentzian";
  const auto n = static_cast<Eigen::Index>(3 * k_peaks);
  m.init.resize(n);
  m.lower.resize(n);
  m.upper.resize(n);
  m.scale.resize(n);
  const double amp_scale = std::max(*std::max_element(amplitudes.begin(), amplitudes.end()), 1e-300);
  for (std::size_t k = 0; k < k_peaks; ++k) {
    const std::string id = std::to_string(k + 1);
    m.names.push_back("center" + id);
    m.names.push_back("fwhm" + id);
    m.names.push_back("amplitude" + id);
    const auto j = static_cast<Eigen::Index>(3 * k);
    m.init.segment<3>(j) << centers[k], fwhms[k], amplitudes[k];
    m.lower.segment<3>(j) << f_lo, 0.1 * step, 0.0;
    m.upper.segment<3>(j) << f_hi, 2.0 * span, kInf;
    m.scale.segment<3>(j) << std::max(span, 1.0), std::max(fwhms[k], step), amp_scale;
  }

  m.predict = [freqs, k_peaks](const Eigen::VectorXd& x) {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(freqs.size());
    for (std::size_t k = 0; k < k_peaks; ++k) {
      const auto j = static_cast<Eigen::Index>(3 * k);
      const double c = x[j];
      const double h = 0.5 * x[j + 1];
      const double a = x[j + 2];
      y.array() += a * h * h / ((freqs.array() - c).square() + h * h);
    }
    return y;
  };
  m.jacobian = [freqs, k_peaks](const Eigen::VectorXd& x) {
    Eigen::MatrixXd jac(freqs.size(), static_cast<Eigen::Index>(3 * k_peaks));
    for (std::size_t k = 0; k < k_peaks; ++k) {
      const auto j = static_cast<Eigen::Index>(3 * k);
      const double c = x[j];
      const double h = 0.5 * x[j + 1];
      const double a = x[j + 2];
      const Eigen::ArrayXd dx = freqs.array() - c;
      const Eigen::ArrayXd den = dx.square() + h * h;
      jac.col(j) = (a * h * h * 2.0 * dx / den.square()).matrix();
      // dL/dw = 0.5 dL/dh, dL/dh = 2 a h dx^2 / den^2
      jac.col(j + 1) = (a * h * dx.square() / den.square()).matrix();
      jac.col(j + 2) = (h * h / den).matrix();
    }
    return jac;
  };
  return m;
}

FitResult fit_lorentzians(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, int n_peaks,
                          const FitOptions& opts) {
  if (n_peaks < 1) throw DomainError("fit_lorentzians: n_peaks must be at least 1");
  if (freqs.size() != power.size() || freqs.size() < 4) throw PreconditionError("fit_lorentzians: bad trace");

  auto found = find_peaks(freqs, power, 0.05);
  std::sort(found.begin(), found.end(), [](const Peak& a, const Peak& b) { return a.amplitude > b.amplitude; });
  if (found.size() > static_cast<std::size_t>(n_peaks)) found.resize(static_cast<std::size_t>(n_peaks));
  std::sort(found.begin(), found.end(), [](const Peak& a, const Peak& b) { return a.center < b.center; });

  const double step = (freqs.maxCoeff() - freqs.minCoeff()) / static_cast<double>(freqs.size() - 1);
  std::vector<double> centers, fwhms, amps;
  for (const auto& pk : found) {
    centers.push_back(pk.center);
    fwhms.push_back(std::max(pk.fwhm, step));
    amps.push_back(pk.amplitude);
  }
  double typical_width = 10.0 * step;
  if (!fwhms.empty()) {
    std::vector<double> sorted = fwhms;
    std::sort(sorted.begin(), sorted.end());
    typical_width = sorted[sorted.size() / 2];
  }
  const double ymax = power.maxCoeff();
  while (centers.size() < static_cast<std::size_t>(n_peaks)) {
    // Seed a surplus peak where the current model misses the data most.
    Eigen::VectorXd resid = power;
    if (!centers.empty()) {
      const FitModel current = lorentzian_model(freqs, centers, fwhms, amps);
      resid -= current.predict(current.init);
    }
    Eigen::Index worst = 0;
    resid.maxCoeff(&worst);
    centers.push_back(freqs[worst]);
    fwhms.push_back(typical_width);
    amps.push_back(centers.size() == 1 ? ymax : 1e-3 * ymax);
  }

  const FitModel model = lorentzian_model(freqs, centers, fwhms, amps);
  FitOptions o = opts;
  if (!o.fixed) o.fixed = std::vector<std::string>{};
  return run_fit(model, power, o);
}

FitResult fit_lorentzians(const Spectrum& s, int n_peaks, const FitOptions& opts) {
  return fit_lorentzians(s.freqs, s.power(), n_peaks, opts);
}

FitModel jc_model(const Eigen::VectorXd& freqs, const SystemParams& init, double scale) {
  FitModel m;
  m.model = "jc";
  m.names = {"f_r", "f_t", "g_t", "gamma_t", "kappa", "scale"};
  m.init.resize(6);
  m.init << init.f_r, init.f_t, init.g_t, init.gamma_t, init.kappa, scale;
  m.lower.resize(6);
  m.lower << -kInf, -kInf, 0.0, 0.0, 0.0, 0.0;
  m.upper = Eigen::VectorXd::Constant(6, kInf);
  m.scale.resize(6);
  m.scale << 1.0, 1.0, 1.0, 1.0, 1.0, std::max(std::abs(scale), 1e-300);

  m.predict = [freqs](const Eigen::VectorXd& x) {
    Eigen::VectorXd y(freqs.size());
    for (Eigen::Index i = 0; i < freqs.size(); ++i) {
      const double f = freqs[i];
      const Complex a = x[1] - f - kI * (0.5 * x[3]);
      const Complex d = x[0] - f - kI * (0.5 * x[4]) - x[2] * x[2] / a;
      y[i] = x[5] / std::norm(d);
    }
    return y;
  };
  m.jacobian = [freqs](const Eigen::VectorXd& x) {
    Eigen::MatrixXd jac(freqs.size(), 6);
    const double g = x[2];
    for (Eigen::Index i = 0; i < freqs.size(); ++i) {
      const double f = freqs[i];
      const Complex a = x[1] - f - kI * (0.5 * x[3]);
      const Complex d = x[0] - f - kI * (0.5 * x[4]) - g * g / a;
      const Complex g2a2 = g * g / (a * a);
      jac(i, 0) = x[5] * power_derivative(d, 1.0);
      jac(i, 1) = x[5] * power_derivative(d, g2a2);
      jac(i, 2) = x[5] * power_derivative(d, -2.0 * g / a);
      jac(i, 3) = x[5] * power_derivative(d, -0.5 * kI * g2a2);
      jac(i, 4) = x[5] * power_derivative(d, -0.5 * kI);
      jac(i, 5) = 1.0 / std::norm(d);
    }
    return jac;
  };
  return m;
}

FitResult fit_jc(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, const SystemParams& init,
                 const FitOptions& opts) {
  if (freqs.size() != power.size()) throw PreconditionError("fit_jc: frequency and power sizes differ");
  FitOptions o = opts;
  o.fixed = default_mask(opts, {"kappa"});
  auto fit_from = [&](const SystemParams& start) {
    FitModel model = jc_model(freqs, start, 1.0);
    model = jc_model(freqs, start, best_scale(model.predict(model.init), power));
    return run_fit(model, power, o);
  };
  FitResult best = fit_from(init);

  // Second start with the coupling and centre taken from the two strongest
  // peaks of the data, keeping the initial detuning. The lower cost wins.
  auto is_fixed = [&](const char* name) { return std::find(o.fixed->begin(), o.fixed->end(), name) != o.fixed->end(); };
  if (is_fixed("g_t") || is_fixed("f_r") || is_fixed("f_t")) return best;
  auto peaks = find_peaks(freqs, power, 0.05);
  if (peaks.size() < 2) return best;
  std::partial_sort(peaks.begin(), peaks.begin() + 2, peaks.end(),
                    [](const Peak& a, const Peak& b) { return a.amplitude > b.amplitude; });
  const double lo = std::min(peaks[0].center, peaks[1].center);
  const double hi = std::max(peaks[0].center, peaks[1].center);
  const double detuning = init.f_r - init.f_t;
  const double split2 = (hi - lo) * (hi - lo) - detuning * detuning;
  if (split2 <= 0.0) return best;
  SystemParams seeded = init;
  seeded.g_t = 0.5 * std::sqrt(split2);
  seeded.f_r = 0.5 * (lo + hi) + 0.5 * detuning;
  seeded.f_t = 0.5 * (lo + hi) - 0.5 * detuning;
  FitResult alt = fit_from(seeded);
  if (alt.cost < best.cost) {
    alt.n_iterations += best.n_iterations;
    return alt;
  }
  best.n_iterations += alt.n_iterations;
  return best;
}

FitResult fit_jc(const Spectrum& s, const SystemParams& init, const FitOptions& opts) {
  return fit_jc(s.freqs, s.power(), init, opts);
}

namespace {

// Susceptibility terms on a fixed probe grid, recomputed only when the
// density parameters change.
struct SusceptibilityCache {
  double f_s = std::numeric_limits<double>::quiet_NaN();
  double width = std::numeric_limits<double>::quiet_NaN();
  double q = std::numeric_limits<double>::quiet_NaN();
  bool has_terms = false;
  std::vector<SusceptibilityTerms> terms;
};

}  // namespace

FitModel ensemble_model(const Eigen::VectorXd& freqs, const SystemParams& init, double scale, bool q_fixed) {
  FitModel m;
  m.model = "ensemble";
  m.names = {"f_r", "f_s", "omega_e", "width", "q", "kappa", "scale"};
  m.init.resize(7);
  m.init << init.f_r, init.f_s, init.omega_e, init.width, init.q, init.kappa, scale;
  m.lower.resize(7);
  m.lower << -kInf, -kInf, 0.0, 1e-6, 1.0, 0.0, 0.0;
  m.upper.resize(7);
  m.upper << kInf, kInf, kInf, kInf, 2.999, kInf, kInf;
  m.scale.resize(7);
  m.scale << 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, std::max(std::abs(scale), 1e-300);

  const double gamma_s = init.gamma_s;
  auto cache = std::make_shared<SusceptibilityCache>();

  // Fills cache->terms (derivatives included when need_terms) for x.
  auto refresh = [freqs, gamma_s, q_fixed, cache](const Eigen::VectorXd& x, bool need_terms) {
    const bool same = cache->f_s == x[1] && cache->width == x[3] && cache->q == x[4];
    if (same && (cache->has_terms || !need_terms)) return;
    if (!(x[3] > 0.0)) throw DomainError("ensemble width must be positive");
    QGaussianDensity d = qgaussian_normalize(FrequencyMHz(x[1]), x[3], x[4]);
    const EnsembleSusceptibility chi(d, gamma_s, need_terms && !q_fixed, q_fixed && x[4] == 2.0);
    cache->terms.resize(static_cast<std::size_t>(freqs.size()));
    for (Eigen::Index i = 0; i < freqs.size(); ++i) {
      auto& t = cache->terms[static_cast<std::size_t>(i)];
      if (need_terms) {
        t = chi.terms(freqs[i]);
      } else {
        t = SusceptibilityTerms{chi(freqs[i]), 0.0, 0.0, 0.0};
      }
    }
    cache->f_s = x[1];
    cache->width = x[3];
    cache->q = x[4];
    cache->has_terms = need_terms;
  };

  m.predict = [freqs, refresh, cache](const Eigen::VectorXd& x) {
    refresh(x, false);
    Eigen::VectorXd y(freqs.size());
    const double om2 = x[2] * x[2];
    for (Eigen::Index i = 0; i < freqs.size(); ++i) {
      const Complex chi = cache->terms[static_cast<std::size_t>(i)].chi;
      const Complex d = x[0] - freqs[i] - kI * (0.5 * x[5]) - om2 * chi;
      y[i] = x[6] / std::norm(d);
    }
    return y;
  };
  m.jacobian = [freqs, refresh, cache](const Eigen::VectorXd& x) {
    refresh(x, true);
    Eigen::MatrixXd jac(freqs.size(), 7);
    const double om = x[2];
    const double om2 = om * om;
    for (Eigen::Index i = 0; i < freqs.size(); ++i) {
      const auto& t = cache->terms[static_cast<std::size_t>(i)];
      const Complex d = x[0] - freqs[i] - kI * (0.5 * x[5]) - om2 * t.chi;
      jac(i, 0) = x[6] * power_derivative(d, 1.0);
      jac(i, 1) = x[6] * power_derivative(d, -om2 * t.d_f_s);
      jac(i, 2) = x[6] * power_derivative(d, -2.0 * om * t.chi);
      jac(i, 3) = x[6] * power_derivative(d, -om2 * t.d_width);
      jac(i, 4) = x[6] * power_derivative(d, -om2 * t.d_q);
      jac(i, 5) = x[6] * power_derivative(d, -0.5 * kI);
      jac(i, 6) = 1.0 / std::norm(d);
    }
    return jac;
  };
  return m;
}

FitResult fit_ensemble(const Eigen::VectorXd& freqs, const Eigen::VectorXd& power, const SystemParams& init,
                       const FitOptions& opts) {
  if (freqs.size() != power.size()) throw PreconditionError("fit_ensemble: frequency and power sizes differ");
  FitOptions o = opts;
  o.fixed = default_mask(opts, {"kappa"});
  const bool q_fixed = std::find(o.fixed->begin(), o.fixed->end(), "q") != o.fixed->end();
  FitModel model = ensemble_model(freqs, init, 1.0, q_fixed);
  const double s = best_scale(model.predict(model.init), power);
  model = ensemble_model(freqs, init, s, q_fixed);
  FitResult r = run_fit(model, power, o);
  r.extra["fwhm_rho"] = qgaussian_fwhm_from_width(r.value("width"), r.value("q"));
  return r;
}

FitResult fit_ensemble(const Spectrum& s, const SystemParams& init, const FitOptions& opts) {
  return fit_ensemble(s.freqs, s.power(), init, opts);
}

}  // namespace hqs
