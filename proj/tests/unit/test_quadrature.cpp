#include <cmath>
#include <complex>
#include <numbers>

#include <doctest.h>

#include "hqs/quadrature.hpp"

using namespace hqs;
using std::numbers::pi;
using C = std::complex<double>;
using Vec1 = Eigen::Matrix<double, 1, 1>;

namespace {

// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
auto simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  auto acc = f(a) + f(b);
  for (int k = 1; k < n; ++k) acc += (k % 2 ? 4.0 : 2.0) * f(a + k * h);
  return acc * (h / 3.0);
}

double dawson(double x) {
  return std::exp(-x * x) * simpson([](double t) { return std::exp(t * t); }, 0.0, x, 20000);
}

}  // namespace

TEST_CASE("gauss-kronrod integrates smooth functions") {
  auto r = integrate([](double x) { return std::sin(x); }, 0.0, pi);
  CHECK(r.converged);
  CHECK(r.value == doctest::Approx(2.0).epsilon(1e-13));

  const std::array<double, 3> bp{-10.0, 0.0, 10.0};
  auto g = integrate([](double x) { return std::exp(-x * x); }, std::span<const double>(bp));
  CHECK(g.value == doctest::Approx(std::sqrt(pi)).epsilon(1e-12));
}

TEST_CASE("complex and vector integrands share the refinement loop") {
  auto r = integrate([](double x) { return std::exp(C(0.0, x)); }, 0.0, pi / 2);
  CHECK(std::abs(r.value - C(1.0, 1.0)) < 1e-12);

  auto v = integrate([](double x) { return Eigen::Vector2d(x, x * x); }, 0.0, 3.0);
  CHECK(v.value[0] == doctest::Approx(4.5).epsilon(1e-13));
  CHECK(v.value[1] == doctest::Approx(9.0).epsilon(1e-13));
}

TEST_CASE("outward tail panels") {
  auto t = integrate_tail([](double x) { return 1.0 / (x * x); }, 1.0, +1, 1.0, 0.0, 1e-10);
  CHECK(t.value == doctest::Approx(1.0).epsilon(1e-8));
  auto l = integrate_tail([](double x) { return std::exp(x); }, 0.0, -1, 1.0, 0.0, 1e-12);
  CHECK(l.value == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("cauchy transform of the lorentzian matches the contour result") {
  auto g = [](double u) { return Vec1(1.0 / (pi * (1.0 + u * u))); };
  for (double x : {-30.0, -3.0, -0.4, 0.0, 0.25, 1.0, 7.5, 40.0}) {
    for (double eps : {0.0, 1e-4, 0.3, 5.0}) {
      const C s(x, eps);
      auto r = cauchy_transform<1>(g, s);
      const C exact = -1.0 / (s + C(0.0, 1.0));
      CAPTURE(x);
      CAPTURE(eps);
      CHECK(std::abs(r.value[0] - exact) < 1e-8 * std::abs(exact));
    }
  }
}

TEST_CASE("cauchy transform of the gaussian: brute force and dawson oracles") {
  auto g = [](double u) { return Vec1(std::exp(-u * u)); };
  // Im(s) = 0.5 keeps the integrand smooth enough for a plain Simpson sum.
  for (double x : {-2.0, 0.0, 0.7, 3.0}) {
    const C s(x, 0.5);
    const C brute = simpson([&](double u) { return C(std::exp(-u * u)) / (u - s); }, -40.0, 40.0, 400000);
    auto r = cauchy_transform<1>(g, s);
    CHECK(std::abs(r.value[0] - brute) < 1e-9);
  }
  // On the real axis: principal value -2 sqrt(pi) D(x) plus i pi g(x).
  for (double x : {0.0, 0.5, 1.3, 2.5}) {
    auto r = cauchy_transform<1>(g, C(x, 0.0));
    CHECK(r.value[0].real() == doctest::Approx(-2.0 * std::sqrt(pi) * dawson(x)).epsilon(1e-7));
    CHECK(r.value[0].imag() == doctest::Approx(pi * std::exp(-x * x)).epsilon(1e-9));
  }
}

TEST_CASE("cauchy transform rejects the lower half plane") {
  auto g = [](double u) { return Vec1(std::exp(-u * u)); };
  CHECK_THROWS_AS(cauchy_transform<1>(g, C(0.0, -1e-3)), DomainError);
}

TEST_CASE("compact support is honoured") {
  // g = 1 on [-1, 1]: transform is log((1 - s) / (-1 - s)) on the principal branch.
  CauchyOptions o;
  o.support = 1.0;
  auto g = [](double u) { return Vec1(std::abs(u) <= 1.0 ? 1.0 : 0.0); };
  const C s(3.0, 0.2);
  auto r = cauchy_transform<1>(g, s, o);
  const C exact = std::log(C(1.0) - s) - std::log(C(-1.0) - s);
  CHECK(std::abs(r.value[0] - exact) < 1e-8);
}
