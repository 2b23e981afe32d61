#include "hqs/hamiltonian.hpp"

#include <array>
#include <cmath>
#include <tuple>

#include "hqs/derived.hpp"
#include "hqs/eigen_solver.hpp"

namespace hqs {
namespace {

const std::vector<std::string> kSimpleModes = {"resonator", "transmon", "ensemble"};
const std::vector<std::string> kHyperfineModes = {"resonator", "transmon", "spin_-1", "spin_0",
                                                  "spin_+1"};

constexpr int kResonator = 0;
constexpr int kTransmon = 1;

}  // namespace

HamiltonianMatrix build_single_excitation(const SystemParams& p) {
  HamiltonianMatrix h;
  h.basis = enumerate_basis(kSimpleModes, 1).restrict_to_manifold(1);
  h.entries.resize(3, 3);
  h.entries << p.f_r, p.g_t, p.omega_e,
               p.g_t, p.f_t, 0.0,
               p.omega_e, 0.0, p.f_s;
  return h;
}

EigenSolution eigendecompose(const Eigen::MatrixXd& h) {
  if (h.rows() != h.cols()) throw DomainError("eigendecompose: matrix must be square");
  const double asym = (h - h.transpose()).cwiseAbs().maxCoeff();
  if (asym > 1e-12 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw DomainError("eigendecompose: matrix is not symmetric");
  auto sol = jacobi_eigen(h);
  return {std::move(sol.eigenvalues), std::move(sol.eigenvectors)};
}

EigenSolution eigendecompose(const HamiltonianMatrix& h) {
  if (static_cast<std::size_t>(h.entries.rows()) != h.basis.size())
    throw DomainError("eigendecompose: matrix size does not match basis");
  return eigendecompose(h.entries);
}

TripleResonanceModes triple_resonance_modes(const SystemParams& p) {
  if (std::abs(p.f_r - p.f_t) > 1e-9 || std::abs(p.f_r - p.f_s) > 1e-9)
    throw PreconditionError("triple_resonance_modes requires f_r = f_t = f_s");
  const double omega_h = hybrid_coupling(CouplingMHz(p.g_t), CouplingMHz(p.omega_e)).value;
  if (omega_h == 0.0) throw DomainError("triple_resonance_modes: both couplings are zero");

  TripleResonanceModes m;
  m.e_dark = p.f_r;
  m.e_minus = p.f_r - omega_h;
  m.e_plus = p.f_r + omega_h;
  m.bright_amplitudes = Eigen::Vector2d(p.g_t, p.omega_e) / omega_h;
  m.dark_amplitudes = Eigen::Vector2d(p.omega_e, -p.g_t) / omega_h;

  const Eigen::Vector3d photon(1.0, 0.0, 0.0);
  const Eigen::Vector3d bright(0.0, m.bright_amplitudes[0], m.bright_amplitudes[1]);
  m.dark_state = Eigen::Vector3d(0.0, m.dark_amplitudes[0], m.dark_amplitudes[1]);
  m.minus_state = (photon - bright) / std::sqrt(2.0);
  m.plus_state = (photon + bright) / std::sqrt(2.0);
  return m;
}

BrightDarkFrame bright_dark_transform(const SystemParams& p) {
  const double oh2 = p.g_t * p.g_t + p.omega_e * p.omega_e;
  if (oh2 == 0.0) throw DomainError("bright/dark frame undefined when g_t = omega_e = 0");
  BrightDarkFrame f;
  f.omega_h = std::sqrt(oh2);
  f.f_B = (p.f_t * p.g_t * p.g_t + p.f_s * p.omega_e * p.omega_e) / oh2;
  f.f_D = (p.f_t * p.omega_e * p.omega_e + p.f_s * p.g_t * p.g_t) / oh2;
  f.chi = p.g_t * p.omega_e * (p.f_t - p.f_s) / oh2;
  f.bright = Eigen::Vector2d(p.g_t, p.omega_e) / f.omega_h;
  f.dark = Eigen::Vector2d(p.omega_e, -p.g_t) / f.omega_h;
  return f;
}

Eigen::Matrix3d bright_dark_rotation(const BrightDarkFrame& frame) {
  Eigen::Matrix3d u = Eigen::Matrix3d::Zero();
  u(0, 0) = 1.0;
  u.block<2, 1>(1, 1) = frame.bright;
  u.block<2, 1>(1, 2) = frame.dark;
  return u;
}

HamiltonianMatrix build_hyperfine(const SystemParams& p, int n_max) {
  if (n_max != 1 && n_max != 2) throw PreconditionError("build_hyperfine supports n_max of 1 or 2");

  HamiltonianMatrix h;
  h.basis = enumerate_basis(kHyperfineModes, n_max);
  const std::size_t dim = h.basis.size();
  h.entries = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));

  const double alpha = p.hyperfine_alpha;
  const std::array<double, 5> freq = {p.f_r, p.f_t, p.f_s - alpha, p.f_s, p.f_s + alpha};
  const double spin_coupling = p.omega_e / std::sqrt(3.0);
  // (mode i, mode j, coupling) for the exchange terms c (a+ m_j + a m_j+).
  const std::array<std::tuple<int, int, double>, 4> bonds = {
      std::tuple{kResonator, kTransmon, p.g_t}, std::tuple{kResonator, 2, spin_coupling},
      std::tuple{kResonator, 3, spin_coupling}, std::tuple{kResonator, 4, spin_coupling}};

  for (std::size_t col = 0; col < dim; ++col) {
    const Occupation& occ = h.basis.state(col);
    double diag = 0.0;
    for (std::size_t m = 0; m < freq.size(); ++m) diag += freq[m] * occ[m];
    const int nb = occ[kTransmon];
    diag += 0.5 * p.anharm_delta * nb * (nb - 1);
    h.entries(static_cast<Eigen::Index>(col), static_cast<Eigen::Index>(col)) = diag;

    // a_i^dagger a_j |occ> = sqrt((n_i + 1) n_j) |..., n_i + 1, ..., n_j - 1, ...>
    for (const auto& [i, j, c] : bonds) {
      for (const auto& [up, down] : {std::pair{i, j}, std::pair{j, i}}) {
        if (occ[down] == 0) continue;
        Occupation next = occ;
        next[up] += 1;
        next[down] -= 1;
        const long row = h.basis.index_of(next);
        if (row < 0) continue;
        h.entries(row, static_cast<Eigen::Index>(col)) += c * std::sqrt(double(occ[up] + 1) * occ[down]);
      }
    }
  }
  return h;
}

EigenSolution hyperfine_manifold(const SystemParams& p, int n) {
  const auto h = build_hyperfine(p, std::max(n, 1));
  const auto [first, last] = h.basis.manifold(n);
  const auto len = static_cast<Eigen::Index>(last - first);
  return eigendecompose(Eigen::MatrixXd(h.entries.block(static_cast<Eigen::Index>(first),
                                                        static_cast<Eigen::Index>(first), len, len)));
}

std::vector<double> one_photon_transitions(const SystemParams& p) {
  const auto sol = hyperfine_manifold(p, 1);
  return {sol.eigenvalues.begin(), sol.eigenvalues.end()};
}

std::vector<double> two_photon_transitions(const SystemParams& p) {
  const auto sol = hyperfine_manifold(p, 2);
  std::vector<double> out(sol.eigenvalues.begin(), sol.eigenvalues.end());
  for (double& e : out) e *= 0.5;
  return out;
}

}  // namespace hqs
