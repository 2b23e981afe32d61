#include "hqs/qgaussian.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "hqs/quadrature.hpp"

namespace hqs {
namespace {

// phi(t) = log1p(t) / t and its derivative, stable for small |t|.
double log1p_ratio(double t) {
  if (std::abs(t) < 1e-5) return 1.0 - t / 2.0 + t * t / 3.0 - t * t * t / 4.0;
  return std::log1p(t) / t;
}

double log1p_ratio_derivative(double t) {
  if (std::abs(t) < 1e-4) return -0.5 + 2.0 * t / 3.0 - 0.75 * t * t + 0.8 * t * t * t;
  return (t / (1.0 + t) - std::log1p(t)) / (t * t);
}

constexpr double kCoreHalfWidth = 200.0;

}  // namespace

double qgaussian_shape(double u, double q) {
  const double u2 = u * u;
  const double t = (q - 1.0) * u2;
  if (t <= -1.0) return 0.0;
  // ln U = -u^2 * log1p(t) / t
  return std::exp(-u2 * log1p_ratio(t));
}

double qgaussian_shape_dlog_du(double u, double q) {
  return -2.0 * u / (1.0 + (q - 1.0) * u * u);
}

double qgaussian_shape_dlog_dq(double u, double q) {
  const double u2 = u * u;
  const double t = (q - 1.0) * u2;
  if (t <= -1.0) return 0.0;
  return -u2 * u2 * log1p_ratio_derivative(t);
}

double qgaussian_support(double q) {
  if (q >= 1.0) return std::numeric_limits<double>::infinity();
  return 1.0 / std::sqrt(1.0 - q);
}

ShapeNormalization normalize_qgaussian_shape(double q, bool with_q_derivative) {
  if (!std::isfinite(q)) throw DomainError("q must be finite");
  if (q >= 3.0) throw DomainError("q-Gaussian is not normalizable for q >= 3");

  using Vec2 = Eigen::Vector2d;
  auto integrand = [q, with_q_derivative](double u) -> Vec2 {
    const double shape = qgaussian_shape(u, q);
    return {shape, with_q_derivative ? shape * qgaussian_shape_dlog_dq(u, q) : 0.0};
  };

  const double support = qgaussian_support(q);
  const double half = std::min(kCoreHalfWidth, support);
  QuadratureOptions opts;
  opts.rel_tol = 1e-10;
  // The shape is even, so integrate [0, half] and double.
  auto core = integrate(integrand, 0.0, half, opts);
  Vec2 total = core.value;
  bool converged = core.converged;
  if (!std::isfinite(support)) {
    opts.rel_tol = 1e-12;
    auto tail = integrate_tail(integrand, half, +1, half, Vec2(core.value), 1e-12, opts);
    total += tail.value;
    converged = converged && tail.converged;
  }
  if (!converged) throw ConvergenceError("q-Gaussian normalization did not converge");

  ShapeNormalization out;
  out.area = 2.0 * total[0];
  out.dlog_area_dq = with_q_derivative ? total[1] / total[0] : 0.0;
  return out;
}

QGaussianDensity qgaussian_normalize(FrequencyMHz f_center, double width, double q) {
  if (!(width > 0.0) || !std::isfinite(width)) throw DomainError("q-Gaussian width must be > 0");
  const auto norm = normalize_qgaussian_shape(q);
  return QGaussianDensity{f_center, width, q, 1.0 / (width * norm.area)};
}

double qgaussian_eval(const QGaussianDensity& d, FrequencyMHz f) { return d(f.value); }

double qgaussian_fwhm_from_width(double width, double q) {
  const double a = q - 1.0;
  double half_u;
  if (std::abs(a) < 1e-8) {
    half_u = std::sqrt(std::log(2.0) * (1.0 + a * std::log(2.0) / 2.0));
  } else {
    half_u = std::sqrt(std::expm1(a * std::log(2.0)) / a);
  }
  return 2.0 * width * half_u;
}

double qgaussian_width_from_fwhm(double fwhm, double q) {
  return fwhm / qgaussian_fwhm_from_width(1.0, q);
}

double QGaussianDensity::fwhm() const { return qgaussian_fwhm_from_width(width, q); }

}  // namespace hqs
