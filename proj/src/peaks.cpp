#include "hqs/peaks.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/QR>

#include "hqs/errors.hpp"

namespace hqs {
namespace {

// Vertex of the parabola through three points; falls back to the middle point
// when the points are collinear or the vertex leaves the bracket.
std::pair<double, double> parabolic_vertex(double x0, double y0, double x1, double y1, double x2, double y2) {
  const double d01 = (y1 - y0) / (x1 - x0);
  const double d12 = (y2 - y1) / (x2 - x1);
  const double curv = (d12 - d01) / (x2 - x0);
  if (!(curv < 0.0)) return {x1, y1};
  // y = y1 + b (x - x1) + curv (x - x1)^2 with b the slope at x1.
  const double b = d01 + curv * (x1 - x0);
  const double xv = x1 - b / (2.0 * curv);
  if (xv < x0 || xv > x2) return {x1, y1};
  return {xv, y1 - b * b / (4.0 * curv)};
}

double interpolate_crossing(double xa, double ya, double xb, double yb, double level) {
  if (ya == yb) return 0.5 * (xa + xb);
  return xa + (level - ya) * (xb - xa) / (yb - ya);
}

}  // namespace

std::vector<Peak> find_peaks(const Eigen::VectorXd& freqs, const Eigen::VectorXd& y, double min_prominence) {
  if (!(min_prominence > 0.0 && min_prominence <= 1.0))
    throw DomainError("min_prominence must lie in (0, 1]");
  if (freqs.size() != y.size()) throw DomainError("find_peaks: frequency and value sizes differ");
  const Eigen::Index n = y.size();
  std::vector<Peak> peaks;
  if (n < 3) return peaks;
  const double ymax = y.maxCoeff();
  if (!(ymax > 0.0)) return peaks;
  const Eigen::VectorXd v = y / ymax;

  for (Eigen::Index i = 1; i + 1 < n; ++i) {
    if (!(v[i] > v[i - 1])) continue;
    // Plateaus: take the middle sample of a flat top.
    Eigen::Index j = i;
    while (j + 1 < n && v[j + 1] == v[i]) ++j;
    if (j + 1 >= n || !(v[j + 1] < v[i])) {
      i = j;
      continue;
    }
    const Eigen::Index top = (i + j) / 2;
    const bool flat_top = j > i;
    const double height = v[top];

    // Bases: lowest point on each side before the trace rises above the peak.
    Eigen::Index left_base = i;
    for (Eigen::Index k = i - 1; k >= 0 && v[k] <= height; --k)
      if (v[k] < v[left_base]) left_base = k;
    Eigen::Index right_base = j;
    for (Eigen::Index k = j + 1; k < n && v[k] <= height; ++k)
      if (v[k] < v[right_base]) right_base = k;
    const double prominence = height - std::max(v[left_base], v[right_base]);
    i = j;
    if (prominence < min_prominence) continue;

    Peak pk;
    pk.index = top;
    pk.prominence = prominence;
    double center = freqs[top];
    double peak_value = height;
    if (!flat_top) {
      std::tie(center, peak_value) =
          parabolic_vertex(freqs[top - 1], v[top - 1], freqs[top], v[top], freqs[top + 1], v[top + 1]);
    }
    pk.center = center;
    pk.amplitude = peak_value * ymax;

    auto crossings = [&](double level, double& left, bool& has_left, double& right, bool& has_right) {
      has_left = has_right = false;
      for (Eigen::Index k = top; k > left_base; --k) {
        if (v[k - 1] <= level) {
          left = interpolate_crossing(freqs[k - 1], v[k - 1], freqs[k], v[k], level);
          has_left = true;
          break;
        }
      }
      for (Eigen::Index k = top; k < right_base; ++k) {
        if (v[k + 1] <= level) {
          right = interpolate_crossing(freqs[k], v[k], freqs[k + 1], v[k + 1], level);
          has_right = true;
          break;
        }
      }
    };

    double left = center;
    double right = center;
    bool has_left = false;
    bool has_right = false;
    crossings(0.5 * peak_value, left, has_left, right, has_right);
    if (!has_left && !has_right) crossings(peak_value - 0.5 * prominence, left, has_left, right, has_right);
    pk.has_left = has_left;
    pk.has_right = has_right;
    if (has_left && has_right) {
      pk.fwhm = right - left;
    } else if (has_left) {
      pk.fwhm = 2.0 * (center - left);
      right = 2.0 * center - left;
    } else if (has_right) {
      pk.fwhm = 2.0 * (right - center);
      left = 2.0 * center - right;
    } else {
      pk.fwhm = freqs[right_base] - freqs[left_base];
      left = freqs[left_base];
      right = freqs[right_base];
    }
    pk.left_half = left;
    pk.right_half = right;
    if (pk.fwhm > 0.0) peaks.push_back(pk);
  }
  return peaks;
}

std::vector<Peak> find_peaks(const Spectrum& s, double min_prominence) {
  return find_peaks(s.freqs, s.power(), min_prominence);
}

Eigen::VectorXd savitzky_golay(const Eigen::VectorXd& y, int window, int order) {
  if (window < 1 || window % 2 == 0) throw DomainError("savitzky_golay: window must be odd");
  if (order < 0 || order >= window) throw DomainError("savitzky_golay: order must be below window");
  const Eigen::Index n = y.size();
  if (n < window) throw DomainError("savitzky_golay: trace shorter than window");
  const int half = window / 2;

  Eigen::MatrixXd vander(window, order + 1);
  for (int r = 0; r < window; ++r)
    for (int c = 0; c <= order; ++c) vander(r, c) = std::pow(static_cast<double>(r - half), c);
  const Eigen::MatrixXd pinv = vander.completeOrthogonalDecomposition().pseudoInverse();

  auto eval_poly = [&](const Eigen::VectorXd& coef, double t) {
    double acc = 0.0;
    for (int c = order; c >= 0; --c) acc = acc * t + coef[c];
    return acc;
  };

  Eigen::VectorXd out(n);
  for (Eigen::Index i = half; i + half < n; ++i) out[i] = pinv.row(0).dot(y.segment(i - half, window));
  const Eigen::VectorXd head = pinv * y.head(window);
  const Eigen::VectorXd tail = pinv * y.tail(window);
  for (int i = 0; i < half; ++i) {
    out[i] = eval_poly(head, static_cast<double>(i - half));
    out[n - half + i] = eval_poly(tail, static_cast<double>(i + 1));
  }
  return out;
}

}  // namespace hqs
