#include "hqs/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "hqs/errors.hpp"
#include "hqs/hamiltonian.hpp"

namespace hqs {
namespace {

using nlohmann::json;

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

double number_at(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number()) throw ConfigError("key '" + key + "' in " + where + " must be a number");
  return v.get<double>();
}

int integer_at(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw ConfigError("key '" + key + "' in " + where + " must be an integer");
  return v.get<int>();
}

std::string string_at(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ConfigError("key '" + key + "' in " + where + " must be a string");
  return v.get<std::string>();
}

std::string fmt9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

double round6(double v) { return std::round(v * 1e6) / 1e6; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_cell(const std::string& cell, const std::string& where) {
  if (cell == "nan" || cell == "NaN" || cell == "NAN" || cell.empty()) return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(where + ": cannot parse '" + cell + "' as a number");
  }
}

// Non-empty lines with their 1-based line numbers.
std::vector<std::pair<int, std::string>> csv_lines(const std::string& text) {
  std::vector<std::pair<int, std::string>> out;
  std::istringstream ss(text);
  std::string line;
  int number = 0;
  while (std::getline(ss, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    out.emplace_back(number, line);
  }
  return out;
}

}  // namespace

nlohmann::json parse_json(const std::string& text, const std::string& source) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    int line = 1;
    int column = 1;
    const auto end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    throw ConfigError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) { return parse_json(read_text(path), path.string()); }

SystemParams params_from_json(const nlohmann::json& j, const SystemParams& base) {
  if (!j.is_object()) throw ConfigError("system parameters must be a JSON object");
  SystemParams p = base;
  for (const auto& [key, value] : j.items()) {
    if (!is_system_param_key(key)) throw ConfigError("unknown key '" + key + "' in system parameters");
    if (!value.is_number()) throw ConfigError("key '" + key + "' in system parameters must be a number");
    set_param(p, key, value.get<double>());
  }
  return p;
}

nlohmann::json params_to_json(const SystemParams& p) {
  json j = json::object();
  for (auto key : kSystemParamKeys) j[std::string(key)] = get_param(p, key);
  return j;
}

SystemParams preset_params(const std::string& name) {
  if (name == "triple_resonance") return triple_resonance_params();
  if (name == "jc") return characterized_jc_params();
  if (name == "ensemble") return characterized_ensemble_params();
  throw ConfigError("unknown preset '" + name + "' (expected triple_resonance, jc or ensemble)");
}

std::vector<std::string> fit_parameter_names(const std::string& model, int n_peaks) {
  if (model == "lorentzian") {
    std::vector<std::string> out;
    for (int k = 1; k <= n_peaks; ++k)
      for (const char* base : {"center", "fwhm", "amplitude"}) out.push_back(base + std::to_string(k));
    return out;
  }
  if (model == "jc") return {"f_r", "f_t", "g_t", "gamma_t", "kappa", "scale"};
  if (model == "ensemble") return {"f_r", "f_s", "omega_e", "width", "q", "kappa", "scale"};
  if (model == "stepwise") return {"f_r", "f_t", "f_t_slope", "f_s", "gamma_t"};
  throw ConfigError("unknown fit model '" + model + "' (expected lorentzian, jc, ensemble or stepwise)");
}

void RunConfig::validate() const {
  try {
    system.validate();
  } catch (const DomainError& e) {
    throw ConfigError(std::string("system.") + e.what());
  }
  if (!(grid.f_min < grid.f_max)) throw ConfigError("grid.f_min must be below grid.f_max");
  if (grid.n_points < 2) throw ConfigError("grid.n_points must be >= 2");
  if (!(sweep.f_t_min <= sweep.f_t_max)) throw ConfigError("sweep.f_t_min must not exceed sweep.f_t_max");
  if (sweep.n_columns < 1) throw ConfigError("sweep.n_columns must be >= 1");
  if (sweep.n_columns == 1 && sweep.f_t_min != sweep.f_t_max)
    throw ConfigError("sweep.n_columns = 1 needs f_t_min == f_t_max");
  if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be >= 0");
  if (!(prominence > 0.0 && prominence <= 1.0)) throw ConfigError("prominence must lie in (0, 1]");
  if (fit.n_peaks < 1) throw ConfigError("fit.n_peaks must be >= 1");
  if (fit.max_iterations < 1) throw ConfigError("fit.max_iterations must be >= 1");
  const auto names = fit_parameter_names(fit.model, fit.n_peaks);
  if (fit.fixed) {
    for (const auto& name : *fit.fixed)
      if (std::find(names.begin(), names.end(), name) == names.end())
        throw ConfigError("fit.fixed: '" + name + "' is not a parameter of model " + fit.model);
  }
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  reject_unknown(j, {"preset", "system", "model", "grid", "sweep", "noise", "prominence", "fit"}, "config");
  RunConfig c;
  if (j.contains("preset")) c.system = preset_params(string_at(j, "preset", "config"));
  if (j.contains("system")) c.system = params_from_json(j.at("system"), c.system);
  if (j.contains("model")) {
    try {
      c.model = parse_spectrum_model(string_at(j, "model", "config"));
    } catch (const DomainError& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, {"f_min", "f_max", "n_points"}, "grid");
    if (g.contains("f_min")) c.grid.f_min = number_at(g, "f_min", "grid");
    if (g.contains("f_max")) c.grid.f_max = number_at(g, "f_max", "grid");
    if (g.contains("n_points")) c.grid.n_points = integer_at(g, "n_points", "grid");
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    reject_unknown(s, {"f_t_min", "f_t_max", "n_columns", "hyperfine"}, "sweep");
    if (s.contains("f_t_min")) c.sweep.f_t_min = number_at(s, "f_t_min", "sweep");
    if (s.contains("f_t_max")) c.sweep.f_t_max = number_at(s, "f_t_max", "sweep");
    if (s.contains("n_columns")) c.sweep.n_columns = integer_at(s, "n_columns", "sweep");
    if (s.contains("hyperfine")) {
      if (!s.at("hyperfine").is_boolean()) throw ConfigError("key 'hyperfine' in sweep must be a boolean");
      c.sweep.hyperfine = s.at("hyperfine").get<bool>();
    }
  }
  if (j.contains("noise")) c.noise = number_at(j, "noise", "config");
  if (j.contains("prominence")) c.prominence = number_at(j, "prominence", "config");
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    reject_unknown(f, {"model", "fixed", "n_peaks", "max_iterations"}, "fit");
    if (f.contains("model")) c.fit.model = string_at(f, "model", "fit");
    if (f.contains("n_peaks")) c.fit.n_peaks = integer_at(f, "n_peaks", "fit");
    if (f.contains("max_iterations")) c.fit.max_iterations = integer_at(f, "max_iterations", "fit");
    if (f.contains("fixed")) {
      const auto& m = f.at("fixed");
      if (!m.is_array()) throw ConfigError("key 'fixed' in fit must be an array of names");
      std::vector<std::string> names;
      for (const auto& n : m) {
        if (!n.is_string()) throw ConfigError("key 'fixed' in fit must be an array of names");
        names.push_back(n.get<std::string>());
      }
      c.fit.fixed = names;
    }
  }
  c.validate();
  return c;
}

RunConfig read_run_config(const std::filesystem::path& path) { return run_config_from_json(read_json_file(path)); }

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw ConfigError("cannot write '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw ConfigError("cannot replace '" + path.string() + "'");
  }
}

std::string spectrum_to_csv(const Spectrum& s) {
  std::string out = "freq_mhz,s21_re,s21_im,s21_db\n";
  for (Eigen::Index i = 0; i < s.freqs.size(); ++i) {
    const Complex z = s.s21[i];
    out += fmt9(s.freqs[i]) + "," + fmt9(z.real()) + "," + fmt9(z.imag()) + "," +
           fmt9(10.0 * std::log10(std::norm(z))) + "\n";
  }
  return out;
}

std::string sweep_to_csv(const SweepGrid& g) {
  std::string out = "probe_mhz";
  for (double v : g.sweep_values) out += "," + fmt9(v);
  out += "\n";
  for (Eigen::Index i = 0; i < g.freqs.size(); ++i) {
    out += fmt9(g.freqs[i]);
    for (Eigen::Index c = 0; c < g.magnitude_db.cols(); ++c) out += "," + fmt9(g.magnitude_db(i, c));
    out += "\n";
  }
  return out;
}

std::string branches_to_csv(const BranchOverlay& b) {
  const Eigen::Index n = b.energies.cols();
  std::string out = "f_t_mhz";
  for (Eigen::Index k = 1; k <= n; ++k) out += ",branch" + std::to_string(k) + "_mhz";
  for (Eigen::Index k = 1; k <= n; ++k) out += ",res_weight" + std::to_string(k);
  out += "\n";
  for (std::size_t r = 0; r < b.f_t.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    out += fmt9(b.f_t[r]);
    for (Eigen::Index k = 0; k < n; ++k) out += "," + fmt9(b.energies(row, k));
    for (Eigen::Index k = 0; k < n; ++k) out += "," + fmt9(b.resonator_weight(row, k));
    out += "\n";
  }
  return out;
}

TraceFile parse_trace_csv(const std::string& text, const std::filesystem::path& path) {
  const auto lines = csv_lines(text);
  const std::string name = path.string();
  if (lines.empty()) throw ConfigError(name + ": empty trace file");
  const auto header = split_csv_line(lines.front().second);
  auto find = [&](const char* col) -> int {
    for (std::size_t k = 0; k < header.size(); ++k)
      if (header[k] == col) return static_cast<int>(k);
    return -1;
  };
  const int i_f = find("freq_mhz");
  const int i_re = find("s21_re");
  const int i_im = find("s21_im");
  const int i_db = find("s21_db");
  if (i_f < 0) throw ConfigError(name + ":" + std::to_string(lines.front().first) + ": missing freq_mhz column");

  TraceFile tf;
  tf.path = path;
  if (i_re >= 0 && i_im >= 0) {
    tf.format = TraceFormat::complex;
  } else if (i_db >= 0) {
    tf.format = TraceFormat::magnitude_db;
  } else {
    throw ConfigError(name + ":" + std::to_string(lines.front().first) +
                      ": need s21_re and s21_im columns or an s21_db column");
  }

  std::vector<double> freqs;
  std::vector<Complex> s21;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [number, line] = lines[k];
    const std::string where = name + ":" + std::to_string(number);
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    const double f = parse_cell(cells[static_cast<std::size_t>(i_f)], where);
    Complex z;
    if (tf.format == TraceFormat::complex) {
      z = {parse_cell(cells[static_cast<std::size_t>(i_re)], where),
           parse_cell(cells[static_cast<std::size_t>(i_im)], where)};
    } else {
      z = std::sqrt(std::pow(10.0, parse_cell(cells[static_cast<std::size_t>(i_db)], where) / 10.0));
    }
    if (std::isnan(f) || std::isnan(z.real()) || std::isnan(z.imag())) {
      ++tf.dropped_rows;
      continue;
    }
    if (!freqs.empty() && !(f > freqs.back()))
      throw ConfigError(where + ": frequency column must be strictly ascending");
    freqs.push_back(f);
    s21.push_back(z);
  }
  if (freqs.size() < 3) throw ConfigError(name + ": trace has fewer than 3 valid rows");
  tf.spectrum.freqs = Eigen::Map<const Eigen::VectorXd>(freqs.data(), static_cast<Eigen::Index>(freqs.size()));
  tf.spectrum.s21 = Eigen::Map<const Eigen::VectorXcd>(s21.data(), static_cast<Eigen::Index>(s21.size()));
  tf.spectrum.model = "measured";
  return tf;
}

TraceFile read_trace_file(const std::filesystem::path& path) { return parse_trace_csv(read_text(path), path); }

SweepGrid parse_sweep_csv(const std::string& text, const std::filesystem::path& path) {
  const auto lines = csv_lines(text);
  const std::string name = path.string();
  if (lines.empty()) throw ConfigError(name + ": empty sweep file");
  const auto header = split_csv_line(lines.front().second);
  if (header.empty() || header.front() != "probe_mhz")
    throw ConfigError(name + ":" + std::to_string(lines.front().first) + ": first header cell must be probe_mhz");
  if (header.size() < 2) throw ConfigError(name + ": sweep file has no columns");

  SweepGrid g;
  for (std::size_t k = 1; k < header.size(); ++k)
    g.sweep_values.push_back(parse_cell(header[k], name + ":" + std::to_string(lines.front().first)));
  std::vector<double> freqs;
  std::vector<double> values;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const auto& [number, line] = lines[k];
    const std::string where = name + ":" + std::to_string(number);
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw ConfigError(where + ": expected " + std::to_string(header.size()) + " columns, found " +
                        std::to_string(cells.size()));
    const double f = parse_cell(cells[0], where);
    if (std::isnan(f)) continue;
    if (!freqs.empty() && !(f > freqs.back()))
      throw ConfigError(where + ": probe_mhz column must be strictly ascending");
    freqs.push_back(f);
    for (std::size_t c = 1; c < cells.size(); ++c) values.push_back(parse_cell(cells[c], where));
  }
  if (freqs.size() < 3) throw ConfigError(name + ": sweep has fewer than 3 probe rows");
  const auto n_f = static_cast<Eigen::Index>(freqs.size());
  const auto n_c = static_cast<Eigen::Index>(g.sweep_values.size());
  g.freqs = Eigen::Map<const Eigen::VectorXd>(freqs.data(), n_f);
  g.magnitude_db = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n_f, n_c);
  return g;
}

SweepGrid read_sweep_file(const std::filesystem::path& path) { return parse_sweep_csv(read_text(path), path); }

nlohmann::json fit_result_to_json(const FitResult& r) {
  json j;
  j["model"] = r.model;
  json params = json::object();
  json sigma = json::object();
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    params[r.names[k]] = r.values[i];
    sigma[r.names[k]] = std::isfinite(r.sigma[i]) ? json(r.sigma[i]) : json(nullptr);
  }
  json fixed = json::array();
  for (const auto& [name, value] : r.fixed) {
    params[name] = value;
    fixed.push_back(name);
  }
  j["params"] = params;
  j["sigma"] = sigma;
  j["fixed"] = fixed;
  j["residual_rms"] = r.residual_rms;
  j["converged"] = r.converged;
  j["cost"] = r.cost;
  j["n_iterations"] = r.n_iterations;
  j["message"] = r.message;
  if (!r.extra.empty()) {
    json extra = json::object();
    for (const auto& [name, value] : r.extra) extra[name] = std::isfinite(value) ? json(value) : json(nullptr);
    j["extra"] = extra;
  }
  return j;
}

nlohmann::json peaks_to_json(const std::vector<Peak>& peaks) {
  json out = json::array();
  for (const auto& p : peaks)
    out.push_back({{"center_mhz", p.center}, {"fwhm_mhz", p.fwhm}, {"amplitude", p.amplitude},
                   {"prominence", p.prominence}});
  return out;
}

nlohmann::json modes_to_json(const SystemParams& p) {
  auto rounded = [](const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(round6(x));
    return a;
  };
  const auto sol = eigendecompose(build_single_excitation(p));
  std::vector<double> single(sol.eigenvalues.data(), sol.eigenvalues.data() + sol.eigenvalues.size());
  json j;
  j["single_excitation"] = rounded(single);
  j["one_photon"] = rounded(one_photon_transitions(p));
  j["two_photon"] = rounded(two_photon_transitions(p));
  return j;
}

std::string spectrum_plot_script(const std::filesystem::path& csv) {
  return "import sys\n"
         "import numpy as np\n"
         "import matplotlib.pyplot as plt\n\n"
         "path = sys.argv[1] if len(sys.argv) > 1 else " + json(csv.string()).dump() + "\n"
         "d = np.genfromtxt(path, delimiter=',', names=True)\n"
         "plt.plot(d['freq_mhz'], 10 ** (d['s21_db'] / 10))\n"
         "plt.xlabel('probe frequency (MHz)')\n"
         "plt.ylabel('|S21|^2')\n"
         "plt.savefig(path.rsplit('.', 1)[0] + '.png', dpi=150)\n";
}

std::string sweep_plot_script(const std::filesystem::path& heatmap_csv, const std::filesystem::path& branch_csv) {
  return "import sys\n"
         "import numpy as np\n"
         "import matplotlib.pyplot as plt\n\n"
         "heat = sys.argv[1] if len(sys.argv) > 1 else " + json(heatmap_csv.string()).dump() + "\n"
         "branches = sys.argv[2] if len(sys.argv) > 2 else " + json(branch_csv.string()).dump() + "\n"
         "with open(heat) as fh:\n"
         "    f_t = np.array(fh.readline().strip().split(',')[1:], dtype=float)\n"
         "m = np.loadtxt(heat, delimiter=',', skiprows=1)\n"
         "probe, db = m[:, 0], m[:, 1:]\n"
         "plt.pcolormesh(f_t, probe, db, shading='auto', cmap='viridis')\n"
         "plt.colorbar(label='normalized |S21|^2 (dB)')\n"
         "b = np.genfromtxt(branches, delimiter=',', names=True)\n"
         "for name in b.dtype.names:\n"
         "    if name.startswith('branch'):\n"
         "        plt.plot(b['f_t_mhz'], b[name], 'r:', lw=1)\n"
         "plt.ylim(probe.min(), probe.max())\n"
         "plt.xlabel('transmon frequency (MHz)')\n"
         "plt.ylabel('probe frequency (MHz)')\n"
         "plt.savefig(heat.rsplit('.', 1)[0] + '.png', dpi=150)\n";
}

}  // namespace hqs
