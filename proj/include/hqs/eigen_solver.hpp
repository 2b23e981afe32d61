#pragma once

// Cyclic Jacobi diagonalization for small dense symmetric matrices.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Core>

#include "hqs/errors.hpp"

namespace hqs {

template <typename Scalar>
struct SymmetricEigen {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns, aligned with eigenvalues
  int sweeps = 0;
};

// Eigenvalues ascending; each eigenvector is signed so that its
// largest-magnitude component (first one on ties) is positive.
// Throws ConvergenceError if the off-diagonal mass does not vanish within
// max_sweeps cyclic sweeps.
template <typename Derived>
SymmetricEigen<typename Derived::Scalar> jacobi_eigen(const Eigen::MatrixBase<Derived>& input,
                                                      int max_sweeps = 30) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  using std::sqrt;
  using Matrix = typename SymmetricEigen<Scalar>::Matrix;

  if (input.rows() != input.cols()) throw DomainError("jacobi_eigen: matrix must be square");
  const Eigen::Index n = input.rows();
  Matrix a = input.derived().template cast<Scalar>();
  Matrix v = Matrix::Identity(n, n);

  const Scalar scale = a.norm();
  const Scalar eps = std::numeric_limits<Scalar>::epsilon();
  auto off_norm = [&a, n]() {
    Scalar s(0);
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) s += a(p, q) * a(p, q);
    return sqrt(Scalar(2) * s);
  };

  int sweep = 0;
  while (off_norm() > eps * scale) {
    if (sweep >= max_sweeps) throw ConvergenceError("jacobi_eigen: no convergence within sweep bound");
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const Scalar apq = a(p, q);
        if (apq == Scalar(0)) continue;
        // Rotation angle that zeroes a(p, q); t = tan(theta), smaller root.
        const Scalar theta = (a(q, q) - a(p, p)) / (Scalar(2) * apq);
        const Scalar t = (theta >= Scalar(0) ? Scalar(1) : Scalar(-1)) /
                         (abs(theta) + sqrt(theta * theta + Scalar(1)));
        const Scalar c = Scalar(1) / sqrt(t * t + Scalar(1));
        const Scalar s = t * c;

        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar akp = a(k, p);
          const Scalar akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar apk = a(p, k);
          const Scalar aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = Scalar(0);
        for (Eigen::Index k = 0; k < n; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&a](Eigen::Index i, Eigen::Index j) { return a(i, i) < a(j, j); });

  SymmetricEigen<Scalar> out;
  out.sweeps = sweep;
  out.eigenvalues.resize(n);
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.eigenvalues(k) = a(src, src);
    auto col = v.col(src);
    Eigen::Index pivot = 0;
    for (Eigen::Index i = 1; i < n; ++i)
      if (abs(col(i)) > abs(col(pivot)) * (Scalar(1) + Scalar(64) * eps)) pivot = i;
    out.eigenvectors.col(k) = col(pivot) < Scalar(0) ? Matrix(-col) : Matrix(col);
  }
  return out;
}

}  // namespace hqs
