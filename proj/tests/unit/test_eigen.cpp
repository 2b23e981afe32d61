#include <cmath>
#include <random>

#include <doctest.h>

#include "hqs/eigen_solver.hpp"
#include "hqs/errors.hpp"
#include "hqs/hamiltonian.hpp"

using namespace hqs;

namespace {

Eigen::MatrixXd random_symmetric(std::mt19937_64& rng, int n, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) a(i, j) = a(j, i) = nd(rng);
  return a;
}

// Number of eigenvalues below lambda: negative pivots of the symmetric
// elimination of H - lambda I (Sylvester inertia).
int count_below(const Eigen::MatrixXd& h, double lambda) {
  Eigen::MatrixXd a = h - lambda * Eigen::MatrixXd::Identity(h.rows(), h.cols());
  const Eigen::Index n = a.rows();
  int negative = 0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double d = a(k, k);
    if (d < 0.0) ++negative;
    for (Eigen::Index i = k + 1; i < n; ++i)
      for (Eigen::Index j = k + 1; j < n; ++j) a(i, j) -= a(i, k) * a(k, j) / d;
  }
  return negative;
}

// k-th smallest eigenvalue by bisection on the inertia count.
double bisect_eigenvalue(const Eigen::MatrixXd& h, int k) {
  double bound = 0.0;
  for (Eigen::Index i = 0; i < h.rows(); ++i) bound = std::max(bound, h.row(i).cwiseAbs().sum());
  double lo = -bound - 1.0;
  double hi = bound + 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-13 * bound; ++it) {
    const double mid = 0.5 * (lo + hi);
    (count_below(h, mid) > k ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("random symmetric matrices: eigenvalues match inertia bisection") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::MatrixXd h = random_symmetric(rng, 8);
    const auto sol = eigendecompose(h);
    for (int k = 0; k < 8; ++k) CHECK(sol.eigenvalues[k] == doctest::Approx(bisect_eigenvalue(h, k)).epsilon(1e-10));
  }
}

TEST_CASE("residuals and orthonormality") {
  std::mt19937_64 rng(9);
  for (int n : {1, 2, 3, 6, 21}) {
    const Eigen::MatrixXd h = random_symmetric(rng, n, 20.0) + 3000.0 * Eigen::MatrixXd::Identity(n, n);
    const auto sol = eigendecompose(h);
    const double hn = h.norm();
    for (int k = 0; k < n; ++k) {
      const Eigen::VectorXd v = sol.eigenvectors.col(k);
      CHECK((h * v - sol.eigenvalues[k] * v).norm() <= 1e-9 * hn);
      if (k > 0) CHECK(sol.eigenvalues[k] >= sol.eigenvalues[k - 1]);
    }
    CHECK((sol.eigenvectors.transpose() * sol.eigenvectors - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("diagonal input yields the sorted diagonal and permutation vectors") {
  Eigen::MatrixXd d = Eigen::Vector4d(3.0, -1.0, 7.0, 0.5).asDiagonal();
  const auto sol = eigendecompose(d);
  CHECK(sol.eigenvalues[0] == -1.0);
  CHECK(sol.eigenvalues[1] == 0.5);
  CHECK(sol.eigenvalues[2] == 3.0);
  CHECK(sol.eigenvalues[3] == 7.0);
  CHECK(sol.eigenvectors(1, 0) == 1.0);
  CHECK(sol.eigenvectors(3, 1) == 1.0);
  CHECK(sol.eigenvectors(0, 2) == 1.0);
  CHECK(sol.eigenvectors(2, 3) == 1.0);
}

TEST_CASE("sign convention: largest component positive") {
  std::mt19937_64 rng(2);
  const auto sol = eigendecompose(random_symmetric(rng, 5));
  for (int k = 0; k < 5; ++k) {
    Eigen::Index i;
    sol.eigenvectors.col(k).cwiseAbs().maxCoeff(&i);
    CHECK(sol.eigenvectors(i, k) > 0.0);
  }
}

TEST_CASE("degenerate spectra: eigenvalue multiset") {
  Eigen::MatrixXd h = Eigen::MatrixXd::Constant(4, 4, 1.0);  // eigenvalues {0, 0, 0, 4}
  const auto sol = eigendecompose(h);
  CHECK(std::abs(sol.eigenvalues[0]) < 1e-14);
  CHECK(std::abs(sol.eigenvalues[2]) < 1e-14);
  CHECK(sol.eigenvalues[3] == doctest::Approx(4.0));
}

TEST_CASE("rejects non-symmetric and non-square input") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0, 2.1, 1.0;
  CHECK_THROWS_AS(eigendecompose(a), DomainError);
  CHECK_THROWS_AS(eigendecompose(Eigen::MatrixXd(2, 3)), DomainError);
}

TEST_CASE("jacobi template works in long double") {
  Eigen::Matrix<long double, 2, 2> a;
  a << 2.0L, 1.0L, 1.0L, 2.0L;
  const auto sol = jacobi_eigen(a);
  CHECK(static_cast<double>(sol.eigenvalues[0]) == doctest::Approx(1.0));
  CHECK(static_cast<double>(sol.eigenvalues[1]) == doctest::Approx(3.0));
}
