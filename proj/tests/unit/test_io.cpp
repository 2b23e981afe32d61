#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>

#include <unistd.h>

#include <doctest.h>

#include "hqs/errors.hpp"
#include "hqs/io.hpp"

using namespace hqs;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / ("hqs_io_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

bool same_9_digits(double a, double b) {
  if (a == b) return true;
  return std::abs(a - b) <= 5e-9 * std::max(std::abs(a), std::abs(b));
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("system parameter JSON") {
  const SystemParams p = characterized_ensemble_params();
  const auto j = params_to_json(p);
  CHECK(j.size() == kSystemParamKeys.size());
  CHECK(params_from_json(j) == p);

  const auto partial = params_from_json(parse_json(R"({"g_t": 10.5})"));
  CHECK(partial.g_t == 10.5);
  CHECK(partial.f_r == triple_resonance_params().f_r);
  CHECK(params_from_json(parse_json("{}"), SystemParams{}) == SystemParams{});

  CHECK(message_of([] { params_from_json(parse_json(R"({"kapa": 1})")); }).find("kapa") != std::string::npos);
  CHECK(message_of([] { params_from_json(parse_json(R"({"kappa": "x"})")); }).find("kappa") != std::string::npos);
  const auto where = message_of([] { parse_json("{\n  \"f_r\": 3000,\n  }", "cfg.json"); });
  CHECK(where.rfind("cfg.json:3:", 0) == 0);
}

TEST_CASE("run configuration") {
  const auto c = run_config_from_json(parse_json(R"({
    "preset": "jc",
    "system": {"kappa": 0.2},
    "model": "jc",
    "grid": {"f_min": 2980, "f_max": 3030, "n_points": 101},
    "sweep": {"f_t_min": 2990, "f_t_max": 3010, "n_columns": 5, "hyperfine": true},
    "noise": 0.02,
    "prominence": 0.1,
    "fit": {"model": "ensemble", "fixed": ["kappa", "q"]}
  })"));
  CHECK(c.system.g_t == characterized_jc_params().g_t);
  CHECK(c.system.kappa == 0.2);
  CHECK(c.model == SpectrumModel::jc);
  CHECK(c.grid.n_points == 101);
  CHECK(c.sweep.hyperfine);
  CHECK(c.noise == 0.02);
  REQUIRE(c.fit.fixed);
  CHECK(c.fit.fixed->size() == 2);

  const RunConfig d = run_config_from_json(parse_json("{}"));
  CHECK(d.system == triple_resonance_params());
  CHECK(d.model == SpectrumModel::tripartite);
  CHECK_FALSE(d.fit.fixed);

  CHECK(message_of([] { run_config_from_json(parse_json(R"({"grid": {"fmin": 1}})")); }).find("fmin") != std::string::npos);
  CHECK(message_of([] { run_config_from_json(parse_json(R"({"grid": {"f_min": 3, "f_max": 2}})")); }).find("grid") !=
        std::string::npos);
  CHECK(message_of([] { run_config_from_json(parse_json(R"({"fit": {"model": "jc", "fixed": ["q"]}})")); })
            .find("'q'") != std::string::npos);
  CHECK(message_of([] { run_config_from_json(parse_json(R"({"system": {"q": 3.5}})")); }).find("q") !=
        std::string::npos);
  CHECK_THROWS_AS(run_config_from_json(parse_json(R"({"model": "nope"})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(parse_json(R"({"preset": "nope"})")), ConfigError);
  CHECK_THROWS_AS(run_config_from_json(parse_json(R"({"grid": {"n_points": 2.5}})")), ConfigError);
  CHECK(fit_parameter_names("lorentzian", 2).size() == 6);
  CHECK_THROWS_AS(fit_parameter_names("voigt"), ConfigError);
}

TEST_CASE("spectrum CSV round trip to 9 significant digits") {
  const Spectrum s = compute_spectrum(SpectrumModel::tripartite, triple_resonance_params(), 2960.0, 3040.0, 301);
  const std::string text = spectrum_to_csv(s);
  CHECK(text.rfind("freq_mhz,s21_re,s21_im,s21_db\n", 0) == 0);
  const TraceFile back = parse_trace_csv(text);
  CHECK(back.format == TraceFormat::complex);
  REQUIRE(back.spectrum.freqs.size() == s.freqs.size());
  for (Eigen::Index i = 0; i < s.freqs.size(); ++i) {
    CHECK(same_9_digits(back.spectrum.freqs[i], s.freqs[i]));
    CHECK(same_9_digits(back.spectrum.s21[i].real(), s.s21[i].real()));
    CHECK(same_9_digits(back.spectrum.s21[i].imag(), s.s21[i].imag()));
  }
  // A second write/read cycle is a fixed point.
  const std::string again = spectrum_to_csv(back.spectrum);
  CHECK(spectrum_to_csv(parse_trace_csv(again).spectrum) == again);
}

TEST_CASE("trace reader: dB input, NaN rows, ordering") {
  const TraceFile db = parse_trace_csv("freq_mhz,s21_db\n1,0\n2,-3.010299957\n3,nan\n4,-20\n");
  CHECK(db.format == TraceFormat::magnitude_db);
  CHECK(db.dropped_rows == 1);
  REQUIRE(db.spectrum.freqs.size() == 3);
  CHECK(db.spectrum.power()[1] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(db.spectrum.power()[2] == doctest::Approx(0.01).epsilon(1e-9));

  const auto order = message_of([] { parse_trace_csv("freq_mhz,s21_db\n1,0\n3,0\n2,0\n", "t.csv"); });
  CHECK(order.find("t.csv:4") != std::string::npos);
  CHECK_THROWS_AS(parse_trace_csv("freq,s21_db\n1,0\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace_csv("freq_mhz,power\n1,0\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace_csv("freq_mhz,s21_db\n1,0\n2,abc\n3,0\n"), ConfigError);
  CHECK_THROWS_AS(parse_trace_csv("freq_mhz,s21_db\n1,0\n2\n3,0\n"), ConfigError);
  CHECK_THROWS_AS(read_trace_file("/nonexistent/trace.csv"), ConfigError);
}

TEST_CASE("sweep and branch CSV") {
  const SystemParams p = triple_resonance_params();
  const SweepGrid g = sweep_transmon(p, {2990.0, 3001.2, 3012.0}, uniform_grid(2970.0, 3030.0, 61));
  const std::string text = sweep_to_csv(g);
  CHECK(text.rfind("probe_mhz,2990,3001.2,3012\n", 0) == 0);
  const SweepGrid back = parse_sweep_csv(text);
  REQUIRE(back.magnitude_db.rows() == 61);
  REQUIRE(back.magnitude_db.cols() == 3);
  CHECK(back.sweep_values == g.sweep_values);
  for (Eigen::Index i = 0; i < 61; ++i)
    for (Eigen::Index j = 0; j < 3; ++j) CHECK(same_9_digits(back.magnitude_db(i, j), g.magnitude_db(i, j)));

  const std::string branches = branches_to_csv(g.branches);
  CHECK(branches.rfind("f_t_mhz,branch1_mhz,branch2_mhz,branch3_mhz,res_weight1,res_weight2,res_weight3\n", 0) == 0);
  const SweepGrid h = sweep_transmon(p, {3001.2}, uniform_grid(2970.0, 3030.0, 11), true);
  CHECK(branches_to_csv(h.branches).rfind("f_t_mhz,branch1_mhz,branch2_mhz,branch3_mhz,branch4_mhz,branch5_mhz,", 0) == 0);
  CHECK_THROWS_AS(parse_sweep_csv("freq,1\n1,0\n"), ConfigError);
}

TEST_CASE("atomic writes and file readers") {
  const fs::path dir = scratch_dir();
  const fs::path target = dir / "out.csv";
  write_file_atomic(target, "one\n");
  write_file_atomic(target, "two\n");
  std::ifstream in(target);
  std::string line;
  std::getline(in, line);
  CHECK(line == "two");
  std::size_t leftovers = 0;
  for (const auto& e : fs::directory_iterator(dir)) leftovers += e.path() != target;
  CHECK(leftovers == 0);
  CHECK_THROWS_AS(write_file_atomic(dir / "missing" / "x.csv", "x"), ConfigError);

  write_file_atomic(dir / "cfg.json", R"({"system": {"g_t": 1.5}})");
  CHECK(read_run_config(dir / "cfg.json").system.g_t == 1.5);
  fs::remove_all(dir);
}

TEST_CASE("result JSON") {
  FitResult r;
  r.model = "ensemble";
  r.names = {"f_r", "q"};
  r.values = Eigen::Vector2d(3002.0, 1.96);
  r.sigma = Eigen::Vector2d(0.01, kUnresolved);
  r.fixed["kappa"] = 0.171;
  r.extra["fwhm_rho"] = 3.4;
  r.converged = true;
  r.residual_rms = 0.02;
  const auto j = fit_result_to_json(r);
  CHECK(j["model"] == "ensemble");
  CHECK(j["params"]["kappa"] == 0.171);
  CHECK(j["params"]["q"] == 1.96);
  CHECK(j["sigma"].contains("f_r"));
  CHECK(j["sigma"]["q"].is_null());
  CHECK_FALSE(j["sigma"].contains("kappa"));
  CHECK(j["converged"] == true);
  CHECK(j["residual_rms"] == 0.02);
  CHECK(j["extra"]["fwhm_rho"] == 3.4);

  CHECK(peaks_to_json({}).dump() == "[]");
  Peak pk;
  pk.center = 3000.0;
  pk.fwhm = 1.0;
  pk.amplitude = 2.0;
  CHECK(peaks_to_json({pk})[0]["center_mhz"] == 3000.0);

  const auto m = modes_to_json(triple_resonance_params());
  REQUIRE(m["single_excitation"].size() == 3);
  CHECK(m["single_excitation"][0].get<double>() == doctest::Approx(3001.2 - 18.693).epsilon(1e-6));
  CHECK(m["one_photon"].size() == 5);
  CHECK(m["two_photon"].size() == 15);
  for (const auto& v : m["two_photon"]) {
    const double x = v.get<double>();
    CHECK(std::abs(x * 1e6 - std::round(x * 1e6)) < 1e-3);
  }
}

TEST_CASE("plot scripts reference their inputs") {
  CHECK(spectrum_plot_script("a/b.csv").find("\"a/b.csv\"") != std::string::npos);
  const auto s = sweep_plot_script("h.csv", "h_branches.csv");
  CHECK(s.find("\"h_branches.csv\"") != std::string::npos);
  CHECK(s.find("import matplotlib") != std::string::npos);
}
