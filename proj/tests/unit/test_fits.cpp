#include <cmath>
#include <random>

#include <doctest.h>

#include "hqs/errors.hpp"
#include "hqs/fits.hpp"
#include "hqs/spectra.hpp"

using namespace hqs;

namespace {

Eigen::VectorXd noisy(const Eigen::VectorXd& clean, double rel, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, rel * clean.maxCoeff());
  Eigen::VectorXd y = clean;
  for (auto& v : y) v += nd(rng);
  return y;
}

Eigen::VectorXd normalized_power(SpectrumModel m, const SystemParams& p, const Eigen::VectorXd& f) {
  Eigen::VectorXd y = s21_trace(m, p, f).cwiseAbs2();
  return y / y.maxCoeff();
}

// Column-wise relative difference between analytic and central-difference Jacobians.
double jacobian_mismatch(const FitModel& m, const Eigen::VectorXd& x, Eigen::Index skip = -1) {
  const Eigen::MatrixXd a = m.jacobian(x);
  const Eigen::MatrixXd n = finite_difference_jacobian(m.predict, x, m.scale, 1e-6);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    if (j != skip) worst = std::max(worst, (a.col(j) - n.col(j)).norm() / n.col(j).norm());
  return worst;
}

bool within(const FitResult& r, const std::string& name, double truth, double k = 3.0) {
  return std::abs(r.value(name) - truth) <= k * r.sigma_of(name);
}

}  // namespace

TEST_CASE("lorentzian fits") {
  const Eigen::VectorXd f = uniform_grid(3001.5, 3002.6, 441);
  const double c = 3002.058925;
  const double w = 0.154521;
  const FitModel truth = lorentzian_model(f, {c}, {w}, {1.0});
  const Eigen::VectorXd y = noisy(truth.predict(truth.init), 0.01, 1);
  const auto r = fit_lorentzians(f, y, 1);
  CHECK(r.converged);
  CHECK(within(r, "center1", c));
  CHECK(within(r, "fwhm1", w));
  CHECK(r.sigma_of("center1") < 1e-3);

  // Two broad overlapping peaks 36.8 MHz apart.
  const Eigen::VectorXd g = uniform_grid(2960.0, 3040.0, 801);
  const FitModel two = lorentzian_model(g, {2982.3, 3019.1}, {5.5, 6.5}, {1.0, 0.8});
  const auto r2 = fit_lorentzians(g, noisy(two.predict(two.init), 0.01, 2), 2);
  CHECK(r2.converged);
  CHECK(r2.value("center2") - r2.value("center1") == doctest::Approx(36.8).epsilon(2e-3));
  CHECK(within(r2, "fwhm1", 5.5));
  CHECK(within(r2, "fwhm2", 6.5));

  // Surplus peak: amplitude near zero or unresolved.
  const auto r3 = fit_lorentzians(f, y, 2);
  const double a2 = std::min(r3.value("amplitude1"), r3.value("amplitude2"));
  CHECK((a2 < 0.05 || std::isinf(r3.sigma_of("amplitude2"))));

  CHECK(jacobian_mismatch(two, two.init) < 1e-4);
  FitOptions bad;
  bad.fixed = std::vector<std::string>{"centre1"};
  CHECK_THROWS_AS(fit_lorentzians(f, y, 1, bad), ConfigError);
}

TEST_CASE("jc fit: round trip, mask, basin") {
  const SystemParams p = characterized_jc_params();
  const Eigen::VectorXd f = uniform_grid(2975.0, 3040.0, 651);
  const Eigen::VectorXd clean = normalized_power(SpectrumModel::jc, p, f);
  const auto r = fit_jc(f, noisy(clean, 0.02, 5), p);
  CHECK(r.converged);
  CHECK_FALSE(r.is_free("kappa"));
  CHECK(r.value("kappa") == p.kappa);
  for (const char* name : {"f_r", "f_t", "g_t", "gamma_t"}) CHECK(within(r, name, get_param(p, name)));

  SystemParams off = p;
  off.g_t *= 2.0;
  const auto r2 = fit_jc(f, clean, off);
  CHECK(r2.converged);
  CHECK(r2.value("g_t") == doctest::Approx(p.g_t).epsilon(1e-6));

  FitOptions all;
  all.fixed = std::vector<std::string>{};
  const auto r3 = fit_jc(f, noisy(clean, 0.02, 6), p, all);
  CHECK(r3.is_free("kappa"));

  CHECK(jacobian_mismatch(jc_model(f, p), jc_model(f, p).init) < 1e-4);
}

TEST_CASE("estimator consistency at vanishing noise") {
  const SystemParams p = characterized_jc_params();
  const Eigen::VectorXd f = uniform_grid(2975.0, 3040.0, 651);
  SystemParams start = p;
  start.f_r += 0.5;
  start.g_t -= 1.0;
  start.gamma_t *= 1.2;
  const auto r = fit_jc(f, noisy(normalized_power(SpectrumModel::jc, p, f), 1e-4, 7), start);
  for (const char* name : {"f_r", "f_t", "g_t", "gamma_t"})
    CHECK(r.value(name) == doctest::Approx(get_param(p, name)).epsilon(1e-3));

  const SystemParams e = characterized_ensemble_params();
  const Eigen::VectorXd g = uniform_grid(2985.0, 3020.0, 301);
  SystemParams es = e;
  es.f_r += 0.2;
  es.omega_e *= 0.95;
  const auto re = fit_ensemble(g, noisy(normalized_power(SpectrumModel::ensemble, e, g), 1e-4, 8), es);
  for (const char* name : {"f_r", "f_s", "omega_e", "width", "q"})
    CHECK(re.value(name) == doctest::Approx(get_param(e, name)).epsilon(1e-3));
}

TEST_CASE("ensemble fit: round trip and extras") {
  const SystemParams p = characterized_ensemble_params();
  const Eigen::VectorXd f = uniform_grid(2985.0, 3020.0, 401);
  const auto r = fit_ensemble(f, noisy(normalized_power(SpectrumModel::ensemble, p, f), 0.02, 9), p);
  CHECK(r.converged);
  for (const char* name : {"f_r", "f_s", "omega_e", "width", "q"}) CHECK(within(r, name, get_param(p, name)));
  CHECK(r.extra.at("fwhm_rho") == doctest::Approx(qgaussian_fwhm_from_width(r.value("width"), r.value("q"))));
  CHECK_FALSE(r.is_free("gamma_s"));

  const FitModel m = ensemble_model(f, p);
  CHECK(jacobian_mismatch(m, m.init) < 1e-4);
}

TEST_CASE("ensemble fit with q fixed at 2 uses the closed form") {
  SystemParams p = characterized_ensemble_params();
  const Eigen::VectorXd f = uniform_grid(2985.0, 3020.0, 401);
  const Eigen::VectorXd y = normalized_power(SpectrumModel::ensemble, p, f);
  SystemParams init = p;
  init.q = 2.0;
  FitOptions o;
  o.fixed = std::vector<std::string>{"kappa", "q"};
  const auto r2 = fit_ensemble(f, y, init, o);
  CHECK_FALSE(r2.is_free("q"));
  CHECK(r2.value("q") == 2.0);
  const auto rq = fit_ensemble(f, y, p);
  CHECK(std::abs(r2.value("f_r") - rq.value("f_r")) < 0.05);
  CHECK(std::abs(r2.value("f_s") - rq.value("f_s")) < 0.05);

  // The closed form has no q column; q is held fixed on this path.
  const FitModel closed = ensemble_model(f, init, 1.0, true);
  CHECK(jacobian_mismatch(closed, closed.init, 4) < 1e-4);
}

TEST_CASE("ensemble fit on gaussian data selects q near 1") {
  SystemParams p = characterized_ensemble_params();
  p.q = 1.0;
  const Eigen::VectorXd f = uniform_grid(2985.0, 3020.0, 301);
  SystemParams init = p;
  init.q = 1.5;
  const auto r = fit_ensemble(f, normalized_power(SpectrumModel::ensemble, p, f), init);
  CHECK(r.value("q") >= 1.0);
  CHECK(r.value("q") <= 1.1);
}

TEST_CASE("ensemble fit without coupling reports omega_e near zero with large sigma") {
  SystemParams p = characterized_ensemble_params();
  p.omega_e = 0.0;
  const Eigen::VectorXd f = uniform_grid(2998.0, 3006.0, 201);
  SystemParams init = p;
  init.omega_e = 0.5;
  FitOptions o;
  o.fixed = std::vector<std::string>{"kappa", "width", "q", "f_s"};
  const auto r = fit_ensemble(f, noisy(normalized_power(SpectrumModel::ensemble, p, f), 0.02, 10), init, o);
  CHECK(r.value("omega_e") < 0.5);
  CHECK((std::isinf(r.sigma_of("omega_e")) || r.sigma_of("omega_e") > 0.2 * r.value("omega_e")));
}

TEST_CASE("mask validation") {
  const SystemParams p = characterized_jc_params();
  const Eigen::VectorXd f = uniform_grid(2975.0, 3040.0, 101);
  const Eigen::VectorXd y = normalized_power(SpectrumModel::jc, p, f);
  FitOptions o;
  o.fixed = std::vector<std::string>{"omega_e"};
  CHECK_THROWS_AS(fit_jc(f, y, p, o), ConfigError);
  o.fixed = std::vector<std::string>{"f_r", "f_t", "g_t", "gamma_t", "kappa", "scale"};
  CHECK_THROWS_AS(fit_jc(f, y, p, o), ConfigError);
  Eigen::VectorXd bad = y;
  bad[3] = std::nan("");
  CHECK_THROWS_AS(fit_jc(f, bad, p), DomainError);
}
