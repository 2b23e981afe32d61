#pragma once

#include <vector>

#include <Eigen/Core>

#include "hqs/spectra.hpp"

namespace hqs {

struct Peak {
  double center = 0.0;      // MHz, parabolic sub-grid refinement
  double fwhm = 0.0;        // MHz
  double amplitude = 0.0;   // refined peak value, same units as the input trace
  double prominence = 0.0;  // fraction of the trace maximum
  double left_half = 0.0;   // interpolated half-maximum crossings (MHz)
  double right_half = 0.0;
  bool has_left = false;    // crossing found before the neighbouring valley
  bool has_right = false;
  Eigen::Index index = 0;   // grid index of the sampled maximum
};

// Local maxima of y (non-negative, e.g. |S21|^2) whose topographic prominence
// on the max-normalized trace is at least min_prominence, in ascending
// frequency. The half-maximum crossing on each side is searched only up to
// the lowest point separating the peak from the next higher one; when a side
// has no crossing its width is mirrored from the other side, and when neither
// does, the half-prominence level is used instead.
// Throws DomainError unless min_prominence is in (0, 1] and sizes agree.
std::vector<Peak> find_peaks(const Eigen::VectorXd& freqs, const Eigen::VectorXd& y, double min_prominence);
std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence);

// Local polynomial smoother for visual guide curves; edges use the fit of the
// first/last full window. window must be odd and greater than order.
Eigen::VectorXd savitzky_golay(const Eigen::VectorXd& y, int window, int order);

}  // namespace hqs
