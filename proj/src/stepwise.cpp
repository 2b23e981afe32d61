#include "hqs/stepwise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "hqs/errors.hpp"
#include "hqs/hamiltonian.hpp"
#include "hqs/peaks.hpp"

namespace hqs {
namespace {

constexpr Complex kI{0.0, 1.0};
constexpr double kInf = std::numeric_limits<double>::infinity();

const std::vector<std::string> kStage1Names = {"f_r", "f_t", "f_t_slope", "f_s", "gamma_t"};

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

// Robust noise level from second differences: var(y[i+1] - 2 y[i] + y[i-1]) = 6 sigma^2.
double noise_from_second_differences(const Eigen::VectorXd& y) {
  std::vector<double> d;
  for (Eigen::Index i = 1; i + 1 < y.size(); ++i) d.push_back(std::abs(y[i + 1] - 2.0 * y[i] + y[i - 1]));
  return 1.482602218505602 * median(d) / std::sqrt(6.0);
}

// chi(f) of a fixed ensemble as a function of f - f_s, tabulated with values
// and derivatives at equally spaced nodes and evaluated by cubic Hermite
// interpolation. Falls back to direct quadrature outside the table.
class ShiftedSusceptibility {
 public:
  ShiftedSusceptibility(const SystemParams& priors, double x_lo, double x_hi)
      : exact_(priors.density(), priors.gamma_s), f_s0_(priors.f_s) {
    h_ = priors.width / 25.0;
    x0_ = x_lo;
    const auto n = static_cast<std::size_t>(std::ceil((x_hi - x_lo) / h_)) + 1;
    g_.resize(n);
    dg_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto t = exact_.terms(f_s0_ + x0_ + h_ * static_cast<double>(k));
      g_[k] = t.chi;
      dg_[k] = -t.d_f_s;
    }
  }

  // (G(x), G'(x)) with chi(f) = G(f - f_s).
  std::pair<Complex, Complex> operator()(double x) const {
    const double pos = (x - x0_) / h_;
    const auto k = static_cast<std::ptrdiff_t>(std::floor(pos));
    if (k < 0 || k + 1 >= static_cast<std::ptrdiff_t>(g_.size())) {
      const auto t = exact_.terms(f_s0_ + x);
      return {t.chi, -t.d_f_s};
    }
    const double t = pos - static_cast<double>(k);
    const double t2 = t * t;
    const double t3 = t2 * t;
    const auto i = static_cast<std::size_t>(k);
    const Complex value = (2 * t3 - 3 * t2 + 1) * g_[i] + (t3 - 2 * t2 + t) * h_ * dg_[i] +
                          (-2 * t3 + 3 * t2) * g_[i + 1] + (t3 - t2) * h_ * dg_[i + 1];
    const Complex slope = ((6 * t2 - 6 * t) * g_[i] + (3 * t2 - 4 * t + 1) * h_ * dg_[i] +
                           (-6 * t2 + 6 * t) * g_[i + 1] + (3 * t2 - 2 * t) * h_ * dg_[i + 1]) /
                          h_;
    return {value, slope};
  }

 private:
  EnsembleSusceptibility exact_;
  double f_s0_;
  double x0_ = 0.0;
  double h_ = 0.0;
  std::vector<Complex> g_;
  std::vector<Complex> dg_;
};

// A fixed probe window around one tracked peak in one column.
struct Window {
  Eigen::Index column = 0;
  double sweep_value = 0.0;
  Eigen::Index first = 0;
  Eigen::Index count = 0;
  Eigen::MatrixXd hat;       // 3 x count, local quadratic coefficients from samples
  Eigen::Matrix2d whiten;    // inverse Cholesky factor of the observation covariance
  Eigen::Vector2d observed;  // (c1/c0, c2/c0) of the data
};

Eigen::Vector2d normalized_coefficients(const Eigen::Vector3d& c) { return {c[1] / c[0], c[2] / c[0]}; }

Eigen::Matrix<double, 2, 3> normalized_coefficients_jacobian(const Eigen::Vector3d& c) {
  Eigen::Matrix<double, 2, 3> d;
  d << -c[1] / (c[0] * c[0]), 1.0 / c[0], 0.0, -c[2] / (c[0] * c[0]), 0.0, 1.0 / c[0];
  return d;
}

struct ColumnLayout {
  std::vector<Eigen::Index> present;  // data column indices in sweep order
  std::vector<int> slot;              // slot number of each present column
  int n_missing = 0;
};

ColumnLayout layout_columns(const SweepData& data, int max_gap) {
  const auto n_cols = static_cast<Eigen::Index>(data.sweep_values.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n_cols));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return data.sweep_values[static_cast<std::size_t>(a)] < data.sweep_values[static_cast<std::size_t>(b)];
  });

  std::vector<double> spacing;
  for (std::size_t k = 1; k < order.size(); ++k)
    spacing.push_back(data.sweep_values[static_cast<std::size_t>(order[k])] -
                      data.sweep_values[static_cast<std::size_t>(order[k - 1])]);
  const double step = median(spacing);

  ColumnLayout out;
  int slot = -1;
  int run = 0;
  double last_value = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const Eigen::Index c = order[k];
    const double value = data.sweep_values[static_cast<std::size_t>(c)];
    int advance = 1;
    if (k > 0 && step > 0.0) advance = std::max(1, static_cast<int>(std::lround((value - last_value) / step)));
    if (k == 0) advance = 1;
    run += advance - 1;
    out.n_missing += advance - 1;
    slot += advance;
    last_value = value;
    if (!data.power.col(c).allFinite()) {
      ++run;
      ++out.n_missing;
      if (run > max_gap)
        throw EstimationError("sweep has more than " + std::to_string(max_gap) + " consecutive missing columns");
      continue;
    }
    if (run > max_gap)
      throw EstimationError("sweep has more than " + std::to_string(max_gap) + " consecutive missing columns");
    run = 0;
    out.present.push_back(c);
    out.slot.push_back(slot);
  }
  return out;
}

struct Detection {
  std::size_t present_pos;
  Peak peak;
};

struct TrackState {
  std::vector<std::size_t> members;  // indices into detections
  int last_slot = 0;
  double last_pos = 0.0;
  double velocity = 0.0;
};

struct TrackingOutput {
  ColumnLayout layout;
  std::vector<Detection> detections;
  std::vector<std::vector<std::size_t>> tracks;
};

TrackingOutput run_tracking(const SweepData& data, const StepwiseOptions& opts) {
  if (data.sweep_values.size() < 3) throw PreconditionError("sweep needs at least three columns");
  if (data.power.rows() != data.freqs.size() ||
      data.power.cols() != static_cast<Eigen::Index>(data.sweep_values.size()))
    throw PreconditionError("sweep power map shape does not match its axes");
  for (Eigen::Index i = 1; i < data.freqs.size(); ++i)
    if (!(data.freqs[i] > data.freqs[i - 1])) throw PreconditionError("probe grid must be strictly ascending");

  TrackingOutput out;
  out.layout = layout_columns(data, opts.max_interpolated_columns);
  const auto& layout = out.layout;
  const double probe_step = (data.freqs[data.freqs.size() - 1] - data.freqs[0]) /
                            static_cast<double>(data.freqs.size() - 1);

  std::vector<std::vector<std::size_t>> per_column(layout.present.size());
  for (std::size_t k = 0; k < layout.present.size(); ++k) {
    const Eigen::VectorXd col = data.power.col(layout.present[k]);
    for (const auto& pk : find_peaks(data.freqs, col, opts.min_prominence)) {
      per_column[k].push_back(out.detections.size());
      out.detections.push_back({k, pk});
    }
  }

  // Median distance from each detection to its nearest neighbour in the next column.
  std::vector<double> drift;
  for (std::size_t k = 0; k + 1 < layout.present.size(); ++k) {
    if (layout.slot[k + 1] - layout.slot[k] != 1) continue;
    for (auto a : per_column[k]) {
      double best = kInf;
      for (auto b : per_column[k + 1])
        best = std::min(best, std::abs(out.detections[a].peak.center - out.detections[b].peak.center));
      if (std::isfinite(best)) drift.push_back(best);
    }
  }
  const double max_jump = std::max(3.0 * median(drift), 3.0 * probe_step);

  std::vector<TrackState> active;
  std::vector<TrackState> finished;
  for (std::size_t k = 0; k < layout.present.size(); ++k) {
    const int slot = layout.slot[k];
    // Retire branches that cannot bridge to this column.
    for (auto it = active.begin(); it != active.end();) {
      if (slot - it->last_slot > opts.max_interpolated_columns + 1) {
        finished.push_back(std::move(*it));
        it = active.erase(it);
      } else {
        ++it;
      }
    }

    struct Candidate {
      double distance;
      std::size_t track;
      std::size_t detection;
    };
    std::vector<Candidate> candidates;
    for (std::size_t t = 0; t < active.size(); ++t) {
      const int gap = slot - active[t].last_slot;
      const double predicted = active[t].last_pos + active[t].velocity * gap;
      for (auto d : per_column[k]) {
        const double dist = std::abs(out.detections[d].peak.center - predicted);
        if (dist <= max_jump * gap) candidates.push_back({dist, t, d});
      }
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const Candidate& a, const Candidate& b) { return a.distance < b.distance; });
    std::vector<bool> track_used(active.size(), false);
    std::vector<bool> det_used(out.detections.size(), false);
    for (const auto& c : candidates) {
      if (track_used[c.track] || det_used[c.detection]) continue;
      track_used[c.track] = det_used[c.detection] = true;
      auto& tr = active[c.track];
      const double pos = out.detections[c.detection].peak.center;
      tr.velocity = tr.members.size() >= 1 ? (pos - tr.last_pos) / (slot - tr.last_slot) : 0.0;
      tr.last_pos = pos;
      tr.last_slot = slot;
      tr.members.push_back(c.detection);
    }
    for (auto d : per_column[k]) {
      if (det_used[d]) continue;
      TrackState tr;
      tr.members.push_back(d);
      tr.last_slot = slot;
      tr.last_pos = out.detections[d].peak.center;
      active.push_back(std::move(tr));
    }
  }
  for (auto& tr : active) finished.push_back(std::move(tr));

  for (auto& tr : finished)
    if (static_cast<int>(tr.members.size()) >= opts.min_track_length) out.tracks.push_back(std::move(tr.members));
  std::sort(out.tracks.begin(), out.tracks.end(), [&](const auto& a, const auto& b) {
    return out.detections[a.front()].peak.center < out.detections[b.front()].peak.center;
  });
  return out;
}

// Stage-1 model state shared by the residual and Jacobian closures.
struct Stage1Model {
  SystemParams priors;
  Eigen::VectorXd freqs;
  double x_ref = 0.0;
  std::vector<Window> windows;
  std::unique_ptr<ShiftedSusceptibility> chi;

  // Model power and its derivatives over one window.
  void column_terms(const Window& w, const Eigen::VectorXd& x, Eigen::VectorXd& y, Eigen::MatrixXd* dy) const {
    const double f_r = x[0];
    const double f_t = x[1] + x[2] * (w.sweep_value - x_ref);
    const double f_s = x[3];
    const double gamma_t = x[4];
    const double g2 = priors.g_t * priors.g_t;
    const double om2 = priors.omega_e * priors.omega_e;
    y.resize(w.count);
    if (dy) dy->resize(w.count, 5);
    for (Eigen::Index i = 0; i < w.count; ++i) {
      const double f = freqs[w.first + i];
      const auto [g, dg] = (*chi)(f - f_s);
      const Complex a = f_t - f - kI * (0.5 * gamma_t);
      const Complex d = f_r - f - kI * (0.5 * priors.kappa) - g2 / a - om2 * g;
      const double n2 = std::norm(d);
      y[i] = 1.0 / n2;
      if (!dy) continue;
      auto deriv = [&](Complex dd) { return -2.0 * std::real(std::conj(d) * dd) / (n2 * n2); };
      const Complex dft = g2 / (a * a);
      (*dy)(i, 0) = deriv(1.0);
      (*dy)(i, 1) = deriv(dft);
      (*dy)(i, 2) = deriv(dft * (w.sweep_value - x_ref));
      (*dy)(i, 3) = deriv(om2 * dg);
      (*dy)(i, 4) = deriv(-0.5 * kI * dft);
    }
  }

  Eigen::VectorXd residuals(const Eigen::VectorXd& x) const {
    Eigen::VectorXd r(2 * static_cast<Eigen::Index>(windows.size()));
    Eigen::VectorXd y;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto& w = windows[k];
      column_terms(w, x, y, nullptr);
      const Eigen::Vector3d c = w.hat * y;
      r.segment<2>(2 * static_cast<Eigen::Index>(k)) = w.whiten * (normalized_coefficients(c) - w.observed);
    }
    return r;
  }

  Eigen::MatrixXd jacobian(const Eigen::VectorXd& x) const {
    Eigen::MatrixXd jac(2 * static_cast<Eigen::Index>(windows.size()), 5);
    Eigen::VectorXd y;
    Eigen::MatrixXd dy;
    for (std::size_t k = 0; k < windows.size(); ++k) {
      const auto& w = windows[k];
      column_terms(w, x, y, &dy);
      const Eigen::Vector3d c = w.hat * y;
      jac.middleRows<2>(2 * static_cast<Eigen::Index>(k)) =
          w.whiten * normalized_coefficients_jacobian(c) * (w.hat * dy);
    }
    return jac;
  }
};

}  // namespace

SweepData sweep_data_from_grid(const SweepGrid& grid) {
  SweepData d;
  d.sweep_values = grid.sweep_values;
  d.freqs = grid.freqs;
  d.power = grid.magnitude_db.unaryExpr([](double db) { return std::pow(10.0, db / 10.0); });
  return d;
}

std::vector<TrackedBranch> track_peaks(const SweepData& data, const StepwiseOptions& opts) {
  const auto tracking = run_tracking(data, opts);
  std::vector<TrackedBranch> out;
  for (const auto& tr : tracking.tracks) {
    TrackedBranch b;
    for (auto d : tr) {
      const auto& det = tracking.detections[d];
      b.columns.push_back(static_cast<int>(tracking.layout.present[det.present_pos]));
      b.centers.push_back(det.peak.center);
    }
    out.push_back(std::move(b));
  }
  return out;
}

namespace {

struct Stage1Setup {
  TrackingOutput tracking;
  std::vector<double> noise;  // per data column
  std::shared_ptr<Stage1Model> model;
  Stage1Problem result;
};

// Fixed-window local quadratic fit operator over [lo, hi] centred on index mid.
Window make_window(const SweepData& data, Eigen::Index col, Eigen::Index mid, Eigen::Index side) {
  Window w;
  w.column = col;
  w.sweep_value = data.sweep_values[static_cast<std::size_t>(col)];
  w.first = mid - side;
  w.count = 2 * side + 1;
  const double centre = data.freqs[mid];
  const double t_scale = data.freqs[mid + side] - centre;
  Eigen::MatrixXd vander(w.count, 3);
  for (Eigen::Index i = 0; i < w.count; ++i) {
    const double t = (data.freqs[w.first + i] - centre) / t_scale;
    vander.row(i) << 1.0, t, t * t;
  }
  w.hat = vander.completeOrthogonalDecomposition().pseudoInverse();
  return w;
}

// Symmetric half-width (in samples) fitting inside [centre - half, centre + half].
Eigen::Index window_side(const Eigen::VectorXd& freqs, Eigen::Index mid, double half) {
  const Eigen::Index n = freqs.size();
  Eigen::Index lo = mid;
  while (lo > 0 && freqs[lo - 1] >= freqs[mid] - half) --lo;
  Eigen::Index hi = mid;
  while (hi + 1 < n && freqs[hi + 1] <= freqs[mid] + half) ++hi;
  return std::min(mid - lo, hi - mid);
}

// Places one window per tracked detection. Without `at` the windows follow
// the detected data peaks; with `at` they follow the model peaks at those
// parameters, which keeps the window choice independent of the local noise.
void place_windows(Stage1Setup& setup, const SweepData& data, const Eigen::VectorXd* at) {
  auto& model = *setup.model;
  model.windows.clear();
  const Eigen::Index n_f = data.freqs.size();
  for (const auto& tr : setup.tracking.tracks) {
    for (auto d : tr) {
      const auto& det = setup.tracking.detections[d];
      const Eigen::Index col = setup.tracking.layout.present[det.present_pos];
      const Eigen::VectorXd column = data.power.col(col);

      Eigen::Index mid = det.peak.index;
      double half = std::min(det.peak.center - det.peak.left_half, det.peak.right_half - det.peak.center);
      Eigen::Vector3d c_weight;
      if (at) {
        Window full;
        full.sweep_value = data.sweep_values[static_cast<std::size_t>(col)];
        full.first = 0;
        full.count = n_f;
        Eigen::VectorXd y;
        model.column_terms(full, *at, y, nullptr);
        const auto peaks = find_peaks(data.freqs, y, 1e-3);
        if (peaks.empty()) continue;
        const auto nearest = std::min_element(peaks.begin(), peaks.end(), [&](const Peak& a, const Peak& b) {
          return std::abs(a.center - det.peak.center) < std::abs(b.center - det.peak.center);
        });
        mid = nearest->index;
        half = std::min(nearest->center - nearest->left_half, nearest->right_half - nearest->center);
        const Eigen::Index side = window_side(data.freqs, mid, half);
        if (side < 3) continue;
        Window w = make_window(data, col, mid, side);
        const Eigen::Vector3d c_model = w.hat * y.segment(w.first, w.count);
        const Eigen::Vector3d c_data = w.hat * column.segment(w.first, w.count);
        if (!(c_model[0] > 0.0) || !(c_data[0] > 0.0)) continue;
        c_weight = c_model * (c_data[0] / c_model[0]);
      }
      const Eigen::Index side = window_side(data.freqs, mid, half);
      if (side < 3) continue;
      Window w = make_window(data, col, mid, side);
      const Eigen::Vector3d c = w.hat * column.segment(w.first, w.count);
      if (!(c[0] > 0.0)) continue;
      if (!at) c_weight = c;
      w.observed = normalized_coefficients(c);
      const double sigma = setup.noise[static_cast<std::size_t>(col)];
      const Eigen::Matrix<double, 2, 3> dobs = normalized_coefficients_jacobian(c_weight);
      const Eigen::Matrix2d cov = sigma * sigma * dobs * (w.hat * w.hat.transpose()) * dobs.transpose();
      Eigen::LLT<Eigen::Matrix2d> llt(cov);
      if (!(sigma > 0.0) || llt.info() != Eigen::Success) continue;
      w.whiten = llt.matrixL().solve(Eigen::Matrix2d::Identity());
      model.windows.push_back(std::move(w));
    }
  }
  if (model.windows.empty()) throw EstimationError("stage 1 has no usable peak windows");
  setup.result.n_observations = 2 * static_cast<int>(model.windows.size());
}

Stage1Setup build_stage1(const SweepData& data, const SystemParams& priors, const StepwiseOptions& opts) {
  priors.validate();
  Stage1Setup out;
  out.tracking = run_tracking(data, opts);
  const auto& tracking = out.tracking;
  if (tracking.tracks.size() < 2)
    throw EstimationError("stage 1 found " + std::to_string(tracking.tracks.size()) +
                          " trackable peak branches; at least 2 are required");

  auto model = std::make_shared<Stage1Model>();
  out.model = model;
  model->priors = priors;
  model->freqs = data.freqs;
  double sum = 0.0;
  for (auto c : tracking.layout.present) sum += data.sweep_values[static_cast<std::size_t>(c)];
  model->x_ref = sum / static_cast<double>(tracking.layout.present.size());

  out.noise.assign(static_cast<std::size_t>(data.power.cols()), 0.0);
  for (auto c : tracking.layout.present)
    out.noise[static_cast<std::size_t>(c)] = noise_from_second_differences(data.power.col(c));

  const Eigen::Index n_f = data.freqs.size();
  const double f_s_lo = data.freqs[0] - priors.f_s - 30.0;
  const double f_s_hi = data.freqs[n_f - 1] - priors.f_s + 30.0;
  model->chi = std::make_unique<ShiftedSusceptibility>(priors, f_s_lo, f_s_hi);

  place_windows(out, data, nullptr);

  auto& p = out.result;
  p.f_t_reference = model->x_ref;
  p.n_missing_columns = tracking.layout.n_missing;
  for (const auto& tr : tracking.tracks) {
    TrackedBranch b;
    for (auto d : tr) {
      const auto& det = tracking.detections[d];
      b.columns.push_back(static_cast<int>(tracking.layout.present[det.present_pos]));
      b.centers.push_back(det.peak.center);
    }
    p.branches.push_back(std::move(b));
  }
  p.x0.resize(5);
  p.x0 << priors.f_r, model->x_ref, opts.initial_slope, priors.f_s, priors.gamma_t;
  p.problem.names = kStage1Names;
  p.problem.lower.resize(5);
  p.problem.lower << -kInf, -kInf, -kInf, -kInf, 1e-6;
  p.problem.upper = Eigen::VectorXd::Constant(5, kInf);
  p.problem.scale = Eigen::VectorXd::Ones(5);
  p.problem.residuals = [model](const Eigen::VectorXd& x) { return model->residuals(x); };
  p.problem.jacobian = [model](const Eigen::VectorXd& x) { return model->jacobian(x); };
  return out;
}

// Smallest separation between the outer single-excitation branches over the
// fitted transmon range.
double min_bright_gap(const SystemParams& p, double f_t_lo, double f_t_hi) {
  SystemParams col = p;
  double best = kInf;
  const int n = 2001;
  for (int k = 0; k < n; ++k) {
    col.f_t = f_t_lo + (f_t_hi - f_t_lo) * k / (n - 1);
    const auto sol = eigendecompose(build_single_excitation(col));
    best = std::min(best, sol.eigenvalues[2] - sol.eigenvalues[0]);
  }
  return best;
}

}  // namespace

Stage1Problem stepwise_stage1_problem(const SweepData& data, const SystemParams& priors, const StepwiseOptions& opts) {
  return build_stage1(data, priors, opts).result;
}

FitResult stepwise_estimate(const SweepData& data, const SystemParams& priors, const StepwiseOptions& opts) {
  Stage1Setup setup = build_stage1(data, priors, opts);
  const Stage1Problem& s1 = setup.result;

  // Apply the caller's mask by pinning bounds; the driver then never moves them.
  LeastSquaresProblem problem = s1.problem;
  const std::vector<std::string> mask = opts.stage1.fixed ? *opts.stage1.fixed : std::vector<std::string>{};
  std::vector<bool> is_fixed(5, false);
  for (const auto& name : mask) {
    const auto it = std::find(kStage1Names.begin(), kStage1Names.end(), name);
    if (it == kStage1Names.end()) throw ConfigError("cannot fix unknown parameter '" + name + "' of model stepwise");
    is_fixed[static_cast<std::size_t>(it - kStage1Names.begin())] = true;
  }
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index j = 0; j < 5; ++j)
    if (!is_fixed[static_cast<std::size_t>(j)]) free_idx.push_back(j);
  if (free_idx.empty()) throw ConfigError("every stage-1 parameter is fixed");

  const Eigen::VectorXd full0 = s1.x0;
  auto expand = [full0, free_idx](const Eigen::VectorXd& x) {
    Eigen::VectorXd full = full0;
    for (std::size_t k = 0; k < free_idx.size(); ++k) full[free_idx[k]] = x[static_cast<Eigen::Index>(k)];
    return full;
  };
  LeastSquaresProblem reduced;
  const auto n_free = static_cast<Eigen::Index>(free_idx.size());
  reduced.lower.resize(n_free);
  reduced.upper.resize(n_free);
  reduced.scale.resize(n_free);
  Eigen::VectorXd x0(n_free);
  for (Eigen::Index k = 0; k < n_free; ++k) {
    const Eigen::Index j = free_idx[static_cast<std::size_t>(k)];
    reduced.names.push_back(kStage1Names[static_cast<std::size_t>(j)]);
    reduced.lower[k] = problem.lower[j];
    reduced.upper[k] = problem.upper[j];
    reduced.scale[k] = problem.scale[j];
    x0[k] = full0[j];
  }
  reduced.residuals = [problem, expand](const Eigen::VectorXd& x) { return problem.residuals(expand(x)); };
  reduced.jacobian = [problem, expand, free_idx](const Eigen::VectorXd& x) {
    const Eigen::MatrixXd full = problem.jacobian(expand(x));
    Eigen::MatrixXd out(full.rows(), static_cast<Eigen::Index>(free_idx.size()));
    for (std::size_t k = 0; k < free_idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = full.col(free_idx[k]);
    return out;
  };

  // Pass 1 places windows on the detected peaks; pass 2 re-places them on the
  // model peaks at the pass-1 estimate and refits from there.
  FitResult first = least_squares(reduced, x0, opts.stage1.solver);
  const Eigen::VectorXd pass1 = expand(first.values);
  place_windows(setup, data, &pass1);
  FitResult result = least_squares(reduced, first.values, opts.stage1.solver);
  result.n_iterations += first.n_iterations;
  result.model = "stepwise";
  const Eigen::VectorXd best = expand(result.values);
  for (Eigen::Index j = 0; j < 5; ++j)
    if (is_fixed[static_cast<std::size_t>(j)]) result.fixed[kStage1Names[static_cast<std::size_t>(j)]] = best[j];
  for (const char* key : {"g_t", "omega_e", "width", "q", "kappa", "gamma_s"})
    result.fixed[key] = get_param(priors, key);

  // Stage 2: simulate the full tripartite map at the combined parameters.
  SystemParams combined = priors;
  combined.f_r = best[0];
  combined.f_s = best[3];
  combined.gamma_t = best[4];
  const double x_ref = s1.f_t_reference;
  std::vector<double> f_t_values;
  std::vector<Eigen::Index> columns;
  for (Eigen::Index c = 0; c < data.power.cols(); ++c) {
    if (!data.power.col(c).allFinite()) continue;
    columns.push_back(c);
    f_t_values.push_back(best[1] + best[2] * (data.sweep_values[static_cast<std::size_t>(c)] - x_ref));
  }
  combined.f_t = best[1];
  const Eigen::MatrixXd simulated = sweep_power(combined, f_t_values, data.freqs);
  double sq = 0.0;
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const Eigen::VectorXd measured = data.power.col(columns[k]);
    const double peak = measured.maxCoeff();
    sq += (measured / peak - simulated.col(static_cast<Eigen::Index>(k))).squaredNorm();
  }
  const double n_points = static_cast<double>(columns.size()) * static_cast<double>(data.freqs.size());

  const auto [lo_it, hi_it] = std::minmax_element(f_t_values.begin(), f_t_values.end());
  result.extra["stage2_residual_rms"] = std::sqrt(sq / n_points);
  result.extra["min_bright_gap"] = min_bright_gap(combined, *lo_it, *hi_it);
  result.extra["n_tracked_branches"] = static_cast<double>(s1.branches.size());
  result.extra["n_observations"] = setup.result.n_observations;
  result.extra["n_missing_columns"] = s1.n_missing_columns;
  result.extra["f_t_reference"] = x_ref;
  return result;
}

FitResult stepwise_estimate(const SweepGrid& grid, const SystemParams& priors, const StepwiseOptions& opts) {
  return stepwise_estimate(sweep_data_from_grid(grid), priors, opts);
}

}  // namespace hqs
