#pragma once

#include "hqs/units.hpp"

namespace hqs {

// Unnormalized q-Gaussian shape in the standardized variable u = (f - f_c) / width:
//   U_q(u) = [1 - (1 - q) u^2]^(1 / (1 - q)),   U_1(u) = exp(-u^2).
// For q < 1 the bracket is clamped at zero (compact support |u| <= 1/sqrt(1-q)).
double qgaussian_shape(double u, double q);

// d ln U / du and d ln U / dq. Both are finite wherever U > 0, including q -> 1.
double qgaussian_shape_dlog_du(double u, double q);
double qgaussian_shape_dlog_dq(double u, double q);

// Half-extent of the support in u (infinity for q >= 1).
double qgaussian_support(double q);

struct ShapeNormalization {
  double area = 0.0;        // Z(q) = int U_q(u) du
  double dlog_area_dq = 0.0;  // d ln Z / dq
};

// Quadrature over |u| <= 200 (rel. tol 1e-10) plus outward tail panels until a
// panel adds < 1e-12 of the running total. Throws DomainError for q >= 3.
ShapeNormalization normalize_qgaussian_shape(double q, bool with_q_derivative = false);

// Inhomogeneous spin density rho(f) = rho0 * U_q((f - f_center) / width), unit area.
struct QGaussianDensity {
  FrequencyMHz f_center;
  double width = 1.0;  // Delta, MHz
  double q = 1.0;
  double rho0 = 0.0;   // 1/MHz

  double operator()(double f) const { return rho0 * qgaussian_shape((f - f_center.value) / width, q); }

  // Full width at half maximum of rho, MHz.
  double fwhm() const;
};

QGaussianDensity qgaussian_normalize(FrequencyMHz f_center, double width, double q);

double qgaussian_eval(const QGaussianDensity& d, FrequencyMHz f);

// FWHM <-> Delta conversion: FWHM = 2 Delta sqrt((2^(q-1) - 1) / (q - 1)),
// with the q -> 1 limit 2 Delta sqrt(ln 2).
double qgaussian_fwhm_from_width(double width, double q);
double qgaussian_width_from_fwhm(double fwhm, double q);

}  // namespace hqs
