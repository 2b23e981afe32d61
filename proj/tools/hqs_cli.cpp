// hqs: simulate, inspect and fit transmission spectra of the
// resonator + transmon + spin-ensemble system.
//
// Exit codes: 0 success, 1 config/input error, 2 fit did not converge,
// 3 numerical failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hqs/errors.hpp"
#include "hqs/fits.hpp"
#include "hqs/io.hpp"
#include "hqs/peaks.hpp"
#include "hqs/spectra.hpp"
#include "hqs/stepwise.hpp"

namespace fs = std::filesystem;
using namespace hqs;

namespace {

enum Exit { kOk = 0, kInputError = 1, kNotConverged = 2, kNumericalError = 3 };

struct Globals {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool plot_script = false;
};

void emit(const Globals& g, const std::string& text) {
  if (g.out.empty()) {
    std::cout << text;
  } else {
    write_file_atomic(g.out, text);
  }
}

fs::path with_suffix(const fs::path& p, const std::string& suffix, const std::string& ext) {
  fs::path out = p.parent_path() / p.stem();
  out += suffix + ext;
  return out;
}

std::mt19937_64 noise_engine(const Globals& g, double noise) {
  if (noise > 0.0 && !g.seed) throw ConfigError("noise > 0 requires --seed");
  return std::mt19937_64(g.seed.value_or(0));
}

std::vector<double> sweep_columns(const SweepConfig& s) {
  std::vector<double> v(static_cast<std::size_t>(s.n_columns));
  for (int k = 0; k < s.n_columns; ++k)
    v[static_cast<std::size_t>(k)] =
        s.n_columns == 1 ? s.f_t_min : s.f_t_min + (s.f_t_max - s.f_t_min) * k / (s.n_columns - 1);
  return v;
}

int cmd_modes(const Globals& g, const RunConfig& c) {
  emit(g, modes_to_json(c.system).dump(2) + "\n");
  return kOk;
}

int cmd_simulate(const Globals& g, const RunConfig& c) {
  auto rng = noise_engine(g, c.noise);
  Spectrum s = compute_spectrum(c.model, c.system, c.grid.f_min, c.grid.f_max, c.grid.n_points);
  if (c.noise > 0.0) {
    std::normal_distribution<double> normal(0.0, c.noise * s.s21.cwiseAbs().maxCoeff());
    for (auto& z : s.s21) z += Complex(normal(rng), normal(rng));
  }
  emit(g, spectrum_to_csv(s));
  if (g.plot_script) {
    if (g.out.empty()) throw ConfigError("--plot-script needs --out");
    write_file_atomic(with_suffix(g.out, "", ".py"), spectrum_plot_script(g.out));
  }
  return kOk;
}

int cmd_sweep(const Globals& g, const RunConfig& c) {
  if (g.out.empty()) throw ConfigError("sweep writes two files and needs --out");
  auto rng = noise_engine(g, c.noise);
  const auto columns = sweep_columns(c.sweep);
  const Eigen::VectorXd freqs = uniform_grid(c.grid.f_min, c.grid.f_max, c.grid.n_points);
  SweepGrid grid = sweep_transmon(c.system, columns, freqs, c.sweep.hyperfine);
  if (c.noise > 0.0) {
    std::normal_distribution<double> normal(0.0, c.noise);
    const Eigen::MatrixXd power = sweep_power(c.system, columns, freqs);
    for (Eigen::Index j = 0; j < power.cols(); ++j)
      for (Eigen::Index i = 0; i < power.rows(); ++i)
        grid.magnitude_db(i, j) = 10.0 * std::log10(std::max(power(i, j) + normal(rng), 1e-6));
  }
  const fs::path branch_path = with_suffix(g.out, "_branches", ".csv");
  write_file_atomic(g.out, sweep_to_csv(grid));
  write_file_atomic(branch_path, branches_to_csv(grid.branches));
  if (g.plot_script) write_file_atomic(with_suffix(g.out, "", ".py"), sweep_plot_script(g.out, branch_path));
  return kOk;
}

int cmd_peaks(const Globals& g, const RunConfig& c, const std::string& input) {
  const TraceFile tf = read_trace_file(input);
  if (tf.dropped_rows > 0) std::cerr << "warning: dropped " << tf.dropped_rows << " rows containing NaN\n";
  emit(g, peaks_to_json(find_peaks(tf.spectrum, c.prominence)).dump(2) + "\n");
  return kOk;
}

int cmd_fit(const Globals& g, const RunConfig& c, const std::string& input) {
  FitOptions opts;
  opts.fixed = c.fit.fixed;
  opts.solver.max_iterations = c.fit.max_iterations;
  FitResult r;
  if (c.fit.model == "stepwise") {
    StepwiseOptions so;
    so.stage1 = opts;
    r = stepwise_estimate(read_sweep_file(input), c.system, so);
  } else {
    const TraceFile tf = read_trace_file(input);
    if (tf.dropped_rows > 0) std::cerr << "warning: dropped " << tf.dropped_rows << " rows containing NaN\n";
    if (c.fit.model == "lorentzian") {
      r = fit_lorentzians(tf.spectrum, c.fit.n_peaks, opts);
    } else if (c.fit.model == "jc") {
      r = fit_jc(tf.spectrum, c.system, opts);
    } else {
      r = fit_ensemble(tf.spectrum, c.system, opts);
    }
  }
  emit(g, fit_result_to_json(r).dump(2) + "\n");
  return r.converged ? kOk : kNotConverged;
}

std::vector<std::string> split_names(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Transmission spectra of a resonator + transmon + spin-ensemble system"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "output file (stdout when omitted)");
  auto* seed_opt = app.add_option("--seed", seed, "seed for synthetic noise");
  app.add_flag("--plot-script", g.plot_script, "also write a matplotlib script next to the output");

  std::optional<std::string> model;
  std::optional<double> noise;
  std::optional<double> prominence;
  std::optional<std::string> fixed;
  std::optional<int> n_peaks;
  bool hyperfine = false;
  std::string input;

  auto* modes = app.add_subcommand("modes", "print dressed mode frequencies as JSON");
  auto* simulate = app.add_subcommand("simulate", "write a transmission spectrum CSV");
  simulate->add_option("--model", model, "bare, jc, ensemble or tripartite");
  simulate->add_option("--noise", noise, "additive noise relative to max |S21| (needs --seed)");
  auto* sweep = app.add_subcommand("sweep", "write a transmon-sweep heatmap CSV and branch CSV");
  sweep->add_flag("--hyperfine", hyperfine, "overlay hyperfine one-excitation branches");
  sweep->add_option("--noise", noise, "additive noise relative to column max power (needs --seed)");
  auto* peaks = app.add_subcommand("peaks", "detect peaks in a trace CSV");
  peaks->add_option("--input", input, "trace CSV")->required()->check(CLI::ExistingFile);
  peaks->add_option("--prominence", prominence, "minimum normalized prominence");
  auto* fit = app.add_subcommand("fit", "fit a trace CSV (or heatmap CSV for stepwise)");
  fit->add_option("--input", input, "trace or heatmap CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", model, "lorentzian, jc, ensemble or stepwise");
  fit->add_option("--fixed", fixed, "comma-separated parameters held at their initial values");
  fit->add_option("--n-peaks", n_peaks, "number of Lorentzians");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }
  if (*seed_opt) g.seed = seed;

  try {
    RunConfig c = g.config.empty() ? RunConfig{} : read_run_config(g.config);
    if (noise) c.noise = *noise;
    if (prominence) c.prominence = *prominence;
    if (hyperfine) c.sweep.hyperfine = true;
    if (*simulate && model) {
      try {
        c.model = parse_spectrum_model(*model);
      } catch (const DomainError& e) {
        throw ConfigError(std::string("--model: ") + e.what());
      }
    }
    if (*fit) {
      if (model) c.fit.model = *model;
      if (n_peaks) c.fit.n_peaks = *n_peaks;
      if (fixed) c.fit.fixed = split_names(*fixed);
    }
    c.validate();

    if (*modes) return cmd_modes(g, c);
    if (*simulate) return cmd_simulate(g, c);
    if (*sweep) return cmd_sweep(g, c);
    if (*peaks) return cmd_peaks(g, c, input);
    return cmd_fit(g, c, input);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const PreconditionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  }
}
