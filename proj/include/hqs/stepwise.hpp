#pragma once

#include <vector>

#include <Eigen/Core>

#include "hqs/fits.hpp"
#include "hqs/spectra.hpp"

namespace hqs {

// Measured transmission map: linear power, one column per sweep value.
// Columns containing NaN are treated as missing.
struct SweepData {
  std::vector<double> sweep_values;  // nominal transmon frequency per column, MHz
  Eigen::VectorXd freqs;             // probe grid, strictly ascending
  Eigen::MatrixXd power;             // freqs.size() x sweep_values.size()
};

// dB (10 log10 of normalized power) to linear.
SweepData sweep_data_from_grid(const SweepGrid& grid);

struct StepwiseOptions {
  // Column-normalized prominence for peak detection.
  double min_prominence = 0.15;
  // Shortest track (in columns) kept as a branch.
  int min_track_length = 3;
  // Longest run of missing columns that tracking may bridge.
  int max_interpolated_columns = 2;
  // Initial mapping f_t(x) = x_ref + slope * (x - x_ref) of the sweep value x.
  double initial_slope = 1.0;
  // Stage-1 solver settings and fixed mask over
  // {f_r, f_t, f_t_slope, f_s, gamma_t}; default mask is empty.
  FitOptions stage1;
};

// One tracked peak branch: column indices and detected centers (MHz).
struct TrackedBranch {
  std::vector<int> columns;
  std::vector<double> centers;
};

// Nearest-neighbour continuation of detected peaks across columns. A detection
// joins a branch when it lies within 3x the median column-to-column drift (at
// least three probe steps) of the branch's linear extrapolation. Branches
// shorter than min_track_length are dropped. Throws EstimationError when more
// than max_interpolated_columns consecutive columns are missing.
std::vector<TrackedBranch> track_peaks(const SweepData& data, const StepwiseOptions& opts = {});

// Two-stage estimate from a transmon sweep.
//
// Stage 1 tracks the transmission peaks across columns and fits
// f_r, f_t (value at the mean sweep coordinate), f_t_slope, f_s and gamma_t
// with g_t, omega_e, width, q, kappa and gamma_s held at the priors. Each
// tracked peak contributes the normalized slope and curvature of a local
// quadratic fit over a window fixed at the detected peak; the model value is
// the same statistic of the single-excitation resolvent
//   1 / |f_r - f - i kappa/2 - g_t^2 / (f_t - f - i gamma_t/2) - omega_e^2 chi(f)|^2
// with chi the prior ensemble susceptibility. Observations are whitened with
// their linearized noise covariance, using a per-column noise estimate.
//
// Stage 2 simulates the tripartite sweep at the combined parameters without
// re-fitting; extra["stage2_residual_rms"] is the RMS difference of the
// per-column normalized linear maps. Other extras: min_bright_gap,
// n_tracked_branches, n_observations, n_missing_columns, f_t_reference.
//
// Throws EstimationError when fewer than two branches can be tracked.
FitResult stepwise_estimate(const SweepData& data, const SystemParams& priors, const StepwiseOptions& opts = {});
FitResult stepwise_estimate(const SweepGrid& grid, const SystemParams& priors, const StepwiseOptions& opts = {});

// Stage-1 problem built exactly as stepwise_estimate does, exposed for
// Jacobian checks. Parameter order: f_r, f_t, f_t_slope, f_s, gamma_t.
struct Stage1Problem {
  LeastSquaresProblem problem;
  Eigen::VectorXd x0;
  double f_t_reference = 0.0;
  int n_observations = 0;
  int n_missing_columns = 0;
  std::vector<TrackedBranch> branches;
};

Stage1Problem stepwise_stage1_problem(const SweepData& data, const SystemParams& priors,
                                      const StepwiseOptions& opts = {});

}  // namespace hqs
