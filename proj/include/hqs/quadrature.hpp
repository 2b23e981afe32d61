#pragma once

// Adaptive Gauss-Kronrod (7/15) quadrature, templated on the integrand's value
// type so that one refinement loop serves real, complex and small fixed-size
// Eigen vector integrands.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <tuple>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "hqs/errors.hpp"

namespace hqs {

template <class T>
struct QuadratureTraits {
  static T zero() { return T(0); }
  static double norm(const T& v) {
    using std::abs;
    return static_cast<double>(abs(v));
  }
};

template <class Scalar, int Rows, int Cols, int Options, int MaxRows, int MaxCols>
struct QuadratureTraits<Eigen::Matrix<Scalar, Rows, Cols, Options, MaxRows, MaxCols>> {
  using Type = Eigen::Matrix<Scalar, Rows, Cols, Options, MaxRows, MaxCols>;
  static_assert(Rows != Eigen::Dynamic && Cols != Eigen::Dynamic,
                "quadrature supports fixed-size Eigen values only");
  static Type zero() { return Type::Zero(); }
  static double norm(const Type& v) { return static_cast<double>(v.cwiseAbs().maxCoeff()); }
};

struct QuadratureOptions {
  double abs_tol = 0.0;
  double rel_tol = 1e-10;
  int max_intervals = 4000;
};

template <class T>
struct QuadratureResult {
  T value;
  double error = 0.0;
  int evaluations = 0;
  bool converged = true;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
// Gauss weights for the nodes kKronrodNodes[1], [3], [5] and the centre.
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct Panel {
  double a;
  double b;
  T value;
  double error;
  bool operator<(const Panel& o) const { return error < o.error; }
};

// Error estimate follows QUADPACK's QK15: the raw |K - G| difference is
// rescaled by the panel's mean absolute deviation, (200 |K - G| / asc)^1.5.
template <class F, class T = std::decay_t<std::invoke_result_t<F&, double>>>
Panel<T> gauss_kronrod_15(F& f, double a, double b) {
  using Traits = QuadratureTraits<T>;
  const double centre = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  std::array<T, 15> values{};
  values[14] = f(centre);
  T kronrod = values[14] * kKronrodWeights[7];
  T gauss = values[14] * kGaussWeights[3];
  double abs_sum = Traits::norm(values[14]) * kKronrodWeights[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    values[2 * j] = f(centre - dx);
    values[2 * j + 1] = f(centre + dx);
    const T sum = values[2 * j] + values[2 * j + 1];
    kronrod += sum * kKronrodWeights[j];
    abs_sum += (Traits::norm(values[2 * j]) + Traits::norm(values[2 * j + 1])) * kKronrodWeights[j];
    if (j % 2 == 1) gauss += sum * kGaussWeights[j / 2];
  }
  const T mean = kronrod * 0.5;
  double asc = Traits::norm(T(values[14] - mean)) * kKronrodWeights[7];
  for (int j = 0; j < 7; ++j)
    asc += (Traits::norm(T(values[2 * j] - mean)) + Traits::norm(T(values[2 * j + 1] - mean))) * kKronrodWeights[j];

  kronrod *= half;
  gauss *= half;
  const double abs_half = std::abs(half);
  asc *= abs_half;
  double error = Traits::norm(T(kronrod - gauss));
  if (asc != 0.0 && error != 0.0) error = asc * std::min(1.0, std::pow(200.0 * error / asc, 1.5));
  const double resabs = abs_sum * abs_half;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) error = std::max(50.0 * eps * resabs, error);
  return {a, b, kronrod, error};
}

}  // namespace detail

// Globally adaptive integration over consecutive intervals defined by
// `breakpoints` (at least two, ascending). The worst panel is bisected until
// the summed error estimate meets max(abs_tol, rel_tol * |I|).
template <class F, class T = std::decay_t<std::invoke_result_t<F&, double>>>
QuadratureResult<T> integrate(F&& f, std::span<const double> breakpoints,
                              const QuadratureOptions& opts = {}) {
  using Traits = QuadratureTraits<T>;
  std::priority_queue<detail::Panel<T>> panels;
  QuadratureResult<T> out{Traits::zero()};

  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) continue;
    panels.push(detail::gauss_kronrod_15(f, breakpoints[i], breakpoints[i + 1]));
    out.evaluations += 15;
  }

  auto totals = [&panels]() {
    T value = Traits::zero();
    double error = 0.0;
    auto copy = panels;
    while (!copy.empty()) {
      value += copy.top().value;
      error += copy.top().error;
      copy.pop();
    }
    return std::pair<T, double>{value, error};
  };

  // Running sums avoid re-summing the queue on every refinement.
  auto [value, error] = totals();
  int intervals = static_cast<int>(panels.size());
  while (!panels.empty()) {
    const double target = std::max(opts.abs_tol, opts.rel_tol * Traits::norm(value));
    if (error <= target) break;
    if (intervals >= opts.max_intervals) {
      out.converged = false;
      break;
    }
    const detail::Panel<T> worst = panels.top();
    panels.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Panel can no longer be split in floating point.
      out.converged = false;
      panels.push(worst);
      break;
    }
    auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    out.evaluations += 30;
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    panels.push(left);
    panels.push(right);
    ++intervals;
  }

  // Re-sum once at the end to shed accumulated cancellation error.
  std::tie(value, error) = totals();
  out.value = value;
  out.error = error;
  return out;
}

template <class F, class T = std::decay_t<std::invoke_result_t<F&, double>>>
QuadratureResult<T> integrate(F&& f, double a, double b, const QuadratureOptions& opts = {}) {
  const std::array<double, 2> bp{a, b};
  return integrate(std::forward<F>(f), std::span<const double>(bp), opts);
}

// Integrates outward from `start` (direction +1 or -1) over panels of doubling
// width until a panel contributes less than stop_rel * |reference + tail|.
template <class F, class T = std::decay_t<std::invoke_result_t<F&, double>>>
QuadratureResult<T> integrate_tail(F&& f, double start, int direction, double first_width,
                                   const T& reference, double stop_rel,
                                   const QuadratureOptions& opts = {}, int max_panels = 400) {
  using Traits = QuadratureTraits<T>;
  QuadratureResult<T> out{Traits::zero()};
  double lo = start;
  double width = first_width;
  for (int k = 0; k < max_panels; ++k) {
    const double hi = lo + direction * width;
    QuadratureOptions panel_opts = opts;
    panel_opts.abs_tol = std::max(opts.abs_tol, 0.1 * stop_rel * Traits::norm(T(reference + out.value)));
    auto piece = direction > 0 ? integrate(f, lo, hi, panel_opts) : integrate(f, hi, lo, panel_opts);
    out.value += piece.value;
    out.error += piece.error;
    out.evaluations += piece.evaluations;
    out.converged = out.converged && piece.converged;
    if (Traits::norm(piece.value) <= stop_rel * Traits::norm(T(reference + out.value))) return out;
    lo = hi;
    width *= 2.0;
    if (!std::isfinite(lo)) break;
  }
  out.converged = false;
  return out;
}

struct CauchyOptions {
  // Half-width of the core interval around the origin, in the integrand's units.
  double core_half_width = 200.0;
  // Half-width of the window around Re(s) where the singular part is subtracted.
  double window = 1.0;
  double rel_tol = 1e-8;
  double tail_rel = 1e-10;
  // Optional compact support [-support, support]; infinity means unbounded.
  double support = std::numeric_limits<double>::infinity();
};

// Cauchy-type transform  int g(u) / (u - s) du  over the real line for
// Im(s) >= 0, with g returning a fixed-size real Eigen vector. The domain is
// split at Re(s); inside a window around Re(s) the quadratic Taylor part of g
// about Re(s) is subtracted and its integral added in closed form, which also yields
// the principal value plus i*pi*g when Im(s) = 0.
template <int K, class G>
QuadratureResult<Eigen::Matrix<std::complex<double>, K, 1>> cauchy_transform(
    G&& g, std::complex<double> s, const CauchyOptions& opts = {}) {
  using CVec = Eigen::Matrix<std::complex<double>, K, 1>;
  using RVec = Eigen::Matrix<double, K, 1>;
  if (s.imag() < 0.0) throw DomainError("cauchy_transform requires Im(s) >= 0");

  const double x0 = s.real();
  const double eps = s.imag();
  const double half = std::min(opts.core_half_width, opts.support);
  const double window = opts.window;
  const bool inside = std::abs(x0) < opts.support;
  // Taylor coefficients of g about Re(s) from central differences. Any values
  // keep the split exact; accurate ones keep the remainder smooth on the
  // scale of Im(s).
  const double h = 1e-3 * window;
  RVec g0 = RVec::Zero();
  RVec g1 = RVec::Zero();
  RVec g2 = RVec::Zero();
  if (inside) {
    g0 = g(x0);
    if (std::abs(x0) + h < opts.support) {
      const RVec gp = g(x0 + h);
      const RVec gm = g(x0 - h);
      g1 = (gp - gm) / (2.0 * h);
      g2 = (gp - 2.0 * g0 + gm) / (2.0 * h * h);
    }
  }

  auto integrand = [&](double u) -> CVec {
    const std::complex<double> kernel = 1.0 / (u - s);
    const double t = u - x0;
    if (std::abs(t) < window) return (RVec(g(u)) - g0 - t * (g1 + t * g2)).template cast<std::complex<double>>() * kernel;
    return RVec(g(u)).template cast<std::complex<double>>() * kernel;
  };

  std::vector<double> bp{std::min(-half, x0 - window), x0 - window, x0, x0 + window,
                         std::max(half, x0 + window)};
  // Geometric breakpoints away from the singular point match the panels to the
  // algebraic decay of the kernel.
  for (double d = 2.0 * window; d < 2.0 * half; d *= 2.0) {
    if (x0 - d > -half) bp.push_back(x0 - d);
    if (x0 + d < half) bp.push_back(x0 + d);
  }
  // The same around the origin, where g is concentrated.
  for (double d = window; d < half; d *= 2.0) {
    bp.push_back(-d);
    bp.push_back(d);
  }
  if (std::isfinite(opts.support)) {
    bp.push_back(-opts.support);
    bp.push_back(opts.support);
  }
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());

  QuadratureOptions qopts;
  qopts.rel_tol = opts.rel_tol;
  auto core = integrate(integrand, std::span<const double>(bp), qopts);

  // int_{x0-w}^{x0+w} du / (u - x0 - i eps) = 2 i atan(w / eps)
  // int_{x0-w}^{x0+w} (u - x0) du / (u - x0 - i eps) = 2 w - 2 eps atan(w / eps)
  const double angle = eps > 0.0 ? 2.0 * std::atan(window / eps) : std::numbers::pi;
  core.value += g0.template cast<std::complex<double>>() * std::complex<double>(0.0, angle);
  // int_{x0-w}^{x0+w} (u - x0)^2 du / (u - x0 - i eps) = i (2 eps w - 2 eps^2 atan(w / eps))
  core.value += g1.template cast<std::complex<double>>() * std::complex<double>(2.0 * window - eps * angle, 0.0);
  core.value += g2.template cast<std::complex<double>>() * std::complex<double>(0.0, 2.0 * eps * window - eps * eps * angle);

  if (!std::isfinite(opts.support)) {
    const double right_start = bp.back();
    const double left_start = bp.front();
    const double width = std::max(right_start - left_start, 1.0);
    auto right = integrate_tail(integrand, right_start, +1, width, CVec(core.value), opts.tail_rel, qopts);
    auto left = integrate_tail(integrand, left_start, -1, width, CVec(core.value + right.value),
                               opts.tail_rel, qopts);
    core.value += right.value + left.value;
    core.error += right.error + left.error;
    core.evaluations += right.evaluations + left.evaluations;
    core.converged = core.converged && right.converged && left.converged;
  }
  return core;
}

}  // namespace hqs
