#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hqs/least_squares.hpp"
#include "hqs/peaks.hpp"
#include "hqs/spectra.hpp"
#include "hqs/stepwise.hpp"

namespace hqs {

// Parses JSON text; syntax errors become ConfigError "<source>:<line>:<column>: ...".
nlohmann::json parse_json(const std::string& text, const std::string& source = "<json>");
nlohmann::json read_json_file(const std::filesystem::path& path);

// Flat object of SystemParams keys; absent keys keep the value from base.
// Unknown keys and non-numeric values raise ConfigError naming the key.
SystemParams params_from_json(const nlohmann::json& j, const SystemParams& base = triple_resonance_params());
nlohmann::json params_to_json(const SystemParams& p);

// Named parameter sets: "triple_resonance", "jc", "ensemble".
SystemParams preset_params(const std::string& name);

struct GridConfig {
  double f_min = 2960.0;
  double f_max = 3040.0;
  int n_points = 1601;
};

struct SweepConfig {
  double f_t_min = 2951.2;
  double f_t_max = 3051.2;
  int n_columns = 101;
  bool hyperfine = false;
};

struct FitConfig {
  std::string model = "jc";
  std::optional<std::vector<std::string>> fixed;
  int n_peaks = 2;
  int max_iterations = 500;
};

// Whole-run configuration. JSON layout (every key optional):
//   {"preset": "triple_resonance", "system": {...SystemParams keys...},
//    "model": "tripartite", "grid": {"f_min", "f_max", "n_points"},
//    "sweep": {"f_t_min", "f_t_max", "n_columns", "hyperfine"},
//    "noise": 0.0, "prominence": 0.05,
//    "fit": {"model", "fixed": [...], "n_peaks", "max_iterations"}}
// "system" keys override the preset.
struct RunConfig {
  SystemParams system = triple_resonance_params();
  SpectrumModel model = SpectrumModel::tripartite;
  GridConfig grid;
  SweepConfig sweep;
  double noise = 0.0;  // additive Gaussian, relative to the trace maximum
  double prominence = 0.05;
  FitConfig fit;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig read_run_config(const std::filesystem::path& path);

// Parameter names accepted by a fit model's mask.
std::vector<std::string> fit_parameter_names(const std::string& model, int n_peaks = 2);

// Writes content to a temporary sibling and renames it over path.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

// freq_mhz,s21_re,s21_im,s21_db with 9 significant digits; s21_db is 10 log10 |S21|^2.
std::string spectrum_to_csv(const Spectrum& s);

// probe_mhz,<sweep value 1>,...; one row per probe frequency of dB values.
std::string sweep_to_csv(const SweepGrid& g);

// f_t_mhz,branch1_mhz,...,res_weight1,...
std::string branches_to_csv(const BranchOverlay& b);

enum class TraceFormat { complex, magnitude_db };

struct TraceFile {
  std::filesystem::path path;
  Spectrum spectrum;  // for dB input s21 is the real amplitude sqrt(10^(dB/10))
  TraceFormat format = TraceFormat::complex;
  int dropped_rows = 0;  // rows containing NaN
};

// Columns are located by header name: freq_mhz plus either s21_re and s21_im
// or s21_db. Throws ConfigError with the line number on malformed rows or a
// frequency column that is not strictly ascending.
TraceFile parse_trace_csv(const std::string& text, const std::filesystem::path& path = "<trace>");
TraceFile read_trace_file(const std::filesystem::path& path);

// Heatmap CSV as written by sweep_to_csv. Rows with NaN are dropped; columns
// keep their NaN entries (missing columns stay missing).
SweepGrid parse_sweep_csv(const std::string& text, const std::filesystem::path& path = "<sweep>");
SweepGrid read_sweep_file(const std::filesystem::path& path);

// {"model", "params", "sigma", "residual_rms", "converged", ...}. params holds
// fitted and fixed values; sigma only fitted ones (null when unresolvable).
nlohmann::json fit_result_to_json(const FitResult& r);

nlohmann::json peaks_to_json(const std::vector<Peak>& peaks);

// {"single_excitation": [...], "one_photon": [...], "two_photon": [...]}, MHz
// rounded to 6 decimal places.
nlohmann::json modes_to_json(const SystemParams& p);

// Python/matplotlib script that plots the given CSV output.
std::string spectrum_plot_script(const std::filesystem::path& csv);
std::string sweep_plot_script(const std::filesystem::path& heatmap_csv, const std::filesystem::path& branch_csv);

}  // namespace hqs
