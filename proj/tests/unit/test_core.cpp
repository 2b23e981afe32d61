#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "hqs/derived.hpp"
#include "hqs/errors.hpp"
#include "hqs/params.hpp"
#include "hqs/qgaussian.hpp"

using namespace hqs;
using std::numbers::pi;

namespace {

// Trapezoid sum of the normalized density on a fine grid plus analytic-order tails.
double trapezoid_area(const QGaussianDensity& d, double half_extent, int n) {
  const double a = d.f_center.value - half_extent;
  const double h = 2.0 * half_extent / n;
  double acc = 0.5 * (d(a) + d(a + n * h));
  for (int k = 1; k < n; ++k) acc += d(a + k * h);
  return acc * h;
}

// q-Gaussian shape straight from the definition, in long double.
double shape_reference(double u, double q) {
  const long double uu = u;
  if (q == 1.0) return static_cast<double>(std::exp(-uu * uu));
  const long double base = 1.0L - (1.0L - q) * uu * uu;
  return static_cast<double>(std::pow(base, 1.0L / (1.0L - q)));
}

}  // namespace

TEST_CASE("unit wrappers reject non-finite and negative values") {
  CHECK_THROWS_AS(FrequencyMHz(std::nan("")), DomainError);
  CHECK_NOTHROW(FrequencyMHz(-5.0));
  CHECK_THROWS_AS(RateMHz(-0.1), DomainError);
  CHECK_NOTHROW(RateMHz(0.0));
  CHECK_THROWS_AS(CouplingMHz(-1.0), DomainError);
  const double inf = INFINITY;
  CHECK_THROWS_AS(CouplingMHz{inf}, DomainError);
}

TEST_CASE("hybrid coupling") {
  CHECK(hybrid_coupling(CouplingMHz(17.490), CouplingMHz(6.597)).value == doctest::Approx(18.693).epsilon(1e-4));
  CHECK(std::abs(hybrid_coupling(CouplingMHz(17.490), CouplingMHz(6.597)).value - 18.693) < 1e-3);
  CHECK(hybrid_coupling(CouplingMHz(0.0), CouplingMHz(6.597)).value == 6.597);
  CHECK(hybrid_coupling(CouplingMHz(3.0), CouplingMHz(4.0)).value == doctest::Approx(5.0));

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int k = 0; k < 200; ++k) {
    const double a = u(rng);
    const double b = u(rng);
    const double h = hybrid_coupling(CouplingMHz(a), CouplingMHz(b)).value;
    CHECK(h == hybrid_coupling(CouplingMHz(b), CouplingMHz(a)).value);
    CHECK(hybrid_coupling(CouplingMHz(a + 0.5), CouplingMHz(b)).value > h);
    CHECK(hybrid_coupling(CouplingMHz(a), CouplingMHz(b + 0.5)).value > h);
  }
}

TEST_CASE("cooperativity and collective linewidth") {
  const RateMHz gamma_te = collective_linewidth_from_polariton(RateMHz(6.0), RateMHz(0.171));
  CHECK(gamma_te.value == doctest::Approx(11.829));
  const double c = cooperativity(CouplingMHz(18.693), RateMHz(0.171), gamma_te);
  CHECK(c >= 685.0);
  CHECK(c <= 700.0);
  CHECK(cooperativity(CouplingMHz(1.0), RateMHz(4.0), RateMHz(1.0)) == doctest::Approx(1.0));
  CHECK(cooperativity(CouplingMHz(2.0), RateMHz(1.0), RateMHz(1.0)) == doctest::Approx(16.0));
  CHECK_THROWS_AS(cooperativity(CouplingMHz(2.0), RateMHz(0.0), RateMHz(1.0)), DomainError);

  CHECK(collective_linewidth_from_polariton(RateMHz(1.7), RateMHz(0.171)).value == doctest::Approx(3.229));
  CHECK_THROWS_AS(collective_linewidth_from_polariton(RateMHz(0.4), RateMHz(1.0)), DomainError);

  for (double g : {0.0, 0.3, 3.952, 11.829, 40.0}) {
    const RateMHz h = polariton_linewidth(RateMHz(0.171), RateMHz(g));
    CHECK(collective_linewidth_from_polariton(h, RateMHz(0.171)).value == doctest::Approx(g));
  }
}

TEST_CASE("q-gaussian shape against the defining formula") {
  for (double q : {1.0, 1.3, 1.9591, 2.0, 2.7}) {
    for (double u : {0.0, 0.2, 1.0, 2.5, 9.0, 60.0}) {
      CAPTURE(q);
      CAPTURE(u);
      CHECK(qgaussian_shape(u, q) == doctest::Approx(shape_reference(u, q)).epsilon(1e-12));
      CHECK(qgaussian_shape(-u, q) == qgaussian_shape(u, q));
    }
  }
  // Compact support below q = 1.
  CHECK(qgaussian_support(0.5) == doctest::Approx(std::sqrt(2.0)));
  CHECK(qgaussian_shape(1.5, 0.5) == 0.0);
  CHECK(std::isinf(qgaussian_support(1.5)));
}

TEST_CASE("q-gaussian log derivatives match finite differences") {
  for (double q : {1.0, 1.5, 1.9591, 2.4}) {
    for (double u : {0.0, 0.7, 3.0, 12.0}) {
      const double h = 1e-6;
      const double du = (std::log(qgaussian_shape(u + h, q)) - std::log(qgaussian_shape(u - h, q))) / (2 * h);
      const double dq = (std::log(qgaussian_shape(u, q + h)) - std::log(qgaussian_shape(u, q - h))) / (2 * h);
      CHECK(qgaussian_shape_dlog_du(u, q) == doctest::Approx(du).epsilon(1e-6).scale(1.0));
      CHECK(qgaussian_shape_dlog_dq(u, q) == doctest::Approx(dq).epsilon(1e-6).scale(1.0));
    }
  }
}

TEST_CASE("normalization: closed forms and unit area") {
  const auto gauss = qgaussian_normalize(FrequencyMHz(0.0), 2.0, 1.0);
  CHECK(gauss.rho0 == doctest::Approx(1.0 / (2.0 * std::sqrt(pi))).epsilon(1e-10));
  const auto lor = qgaussian_normalize(FrequencyMHz(0.0), 2.0, 2.0);
  CHECK(lor.rho0 == doctest::Approx(1.0 / (2.0 * pi)).epsilon(1e-10));
  CHECK(qgaussian_eval(lor, FrequencyMHz(2.0)) == doctest::Approx(0.5 * lor.rho0));
  CHECK(qgaussian_eval(gauss, FrequencyMHz(0.0)) == gauss.rho0);

  for (double q : {1.0, 1.5, 1.9591, 2.0, 2.5}) {
    const auto d = qgaussian_normalize(FrequencyMHz(3001.185), 3.434, q);
    // Closed-form area for q > 1: sqrt(pi / (q - 1)) Gamma((3 - q) / (2 (q - 1))) / Gamma(1 / (q - 1)).
    double area = std::sqrt(pi);
    if (q > 1.0) {
      const double a = q - 1.0;
      area = std::sqrt(pi / a) * std::exp(std::lgamma((3.0 - q) / (2.0 * a)) - std::lgamma(1.0 / a));
    }
    CAPTURE(q);
    CHECK(d.rho0 * d.width * area == doctest::Approx(1.0).epsilon(1e-9));
  }
  // Independent trapezoid check for the characterized ensemble shape (tails beyond
  // +-L integrate to about 2 rho0 c / L^(2/(q-1) - 1) and are added analytically).
  const double q = 1.9591;
  const auto d = qgaussian_normalize(FrequencyMHz(3001.185), 3.434, q);
  const double L = 2e4;
  const double p = 2.0 / (q - 1.0);
  const double c = std::pow((q - 1.0), -1.0 / (q - 1.0)) * std::pow(d.width, p);
  const double tail = 2.0 * d.rho0 * c / ((p - 1.0) * std::pow(L, p - 1.0));
  CHECK(trapezoid_area(d, L, 4000000) + tail == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("q -> 1 limit approaches the gaussian") {
  const auto g = qgaussian_normalize(FrequencyMHz(10.0), 1.5, 1.0);
  const auto n = qgaussian_normalize(FrequencyMHz(10.0), 1.5, 1.0 + 1e-6);
  double worst = 0.0;
  for (int k = -400; k <= 400; ++k) {
    const double f = 10.0 + 0.02 * k;
    worst = std::max(worst, std::abs(g(f) - n(f)));
  }
  CHECK(worst < 1e-5 * g.rho0);
}

TEST_CASE("density is even with its maximum at the centre") {
  const auto d = qgaussian_normalize(FrequencyMHz(3001.185), 1.7306, 1.9591);
  const double peak = d(3001.185);
  for (double x : {1e-3, 0.5, 2.0, 30.0}) {
    CHECK(d(3001.185 + x) == doctest::Approx(d(3001.185 - x)).epsilon(1e-12));
    CHECK(d(3001.185 + x) < peak);
  }
}

TEST_CASE("fwhm <-> width conversion") {
  CHECK(qgaussian_fwhm_from_width(1.0, 1.0) == doctest::Approx(2.0 * std::sqrt(std::log(2.0))));
  CHECK(qgaussian_fwhm_from_width(1.0, 2.0) == doctest::Approx(2.0));
  for (double q : {1.0, 1.2, 1.9591, 2.6}) {
    const auto d = qgaussian_normalize(FrequencyMHz(0.0), 2.3, q);
    CHECK(d(0.5 * d.fwhm()) == doctest::Approx(0.5 * d.rho0).epsilon(1e-10));
    CHECK(qgaussian_width_from_fwhm(d.fwhm(), q) == doctest::Approx(2.3));
  }
  CHECK(characterized_ensemble_width() == doctest::Approx(1.7306).epsilon(1e-4));
}

TEST_CASE("system parameters") {
  SystemParams p;
  CHECK_NOTHROW(p.validate());
  CHECK(p.density().f_center.value == p.f_s);
  for (auto key : kSystemParamKeys) {
    SystemParams t = p;
    set_param(t, key, 12.5);
    CHECK(get_param(t, key) == 12.5);
  }
  CHECK_THROWS_AS(get_param(p, "kapa"), DomainError);
  CHECK_FALSE(is_system_param_key("kapa"));
  p.q = 3.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = SystemParams{};
  p.kappa = -1.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = SystemParams{};
  p.anharm_delta = 150.0;
  CHECK_NOTHROW(p.validate());

  const auto jc = characterized_jc_params();
  CHECK(jc.omega_e == 0.0);
  CHECK(jc.g_t == 17.490);
  const auto ens = characterized_ensemble_params();
  CHECK(ens.g_t == 0.0);
  CHECK(ens.f_s == 3001.185);
  const auto tri = triple_resonance_params();
  CHECK(tri.f_r == tri.f_t);
  CHECK(tri.f_t == tri.f_s);
}
