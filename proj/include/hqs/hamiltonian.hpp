#pragma once

#include <vector>

#include <Eigen/Core>

#include "hqs/basis.hpp"
#include "hqs/params.hpp"

namespace hqs {

// Real symmetric matrix (MHz) over an enumerated Fock basis. Couplings are
// real under the rotating-wave approximation.
struct HamiltonianMatrix {
  ExcitationBasis basis;
  Eigen::MatrixXd entries;
};

struct EigenSolution {
  Eigen::VectorXd eigenvalues;   // ascending, MHz
  Eigen::MatrixXd eigenvectors;  // orthonormal columns in basis order
};

// 3x3 one-excitation matrix over {|1gG>, |0eG>, |0gE>}:
//   [[f_r, g_t, omega_e], [g_t, f_t, 0], [omega_e, 0, f_s]]
HamiltonianMatrix build_single_excitation(const SystemParams& p);

// Dense symmetric diagonalization (cyclic Jacobi). Throws DomainError if the
// matrix is not symmetric to 1e-12 relative.
EigenSolution eigendecompose(const HamiltonianMatrix& h);
EigenSolution eigendecompose(const Eigen::MatrixXd& h);

// Closed-form eigenmodes at f_r = f_t = f_s. Amplitude pairs are over
// (transmon |eG>, ensemble |gE>); full states are over the 3x3 basis.
struct TripleResonanceModes {
  double e_dark = 0.0;
  double e_minus = 0.0;
  double e_plus = 0.0;
  Eigen::Vector2d bright_amplitudes;  // (g_t, omega_e) / omega_h
  Eigen::Vector2d dark_amplitudes;    // (omega_e, -g_t) / omega_h
  Eigen::Vector3d minus_state;        // (|1gG> - |0B>) / sqrt 2
  Eigen::Vector3d dark_state;         // |0D>
  Eigen::Vector3d plus_state;         // (|1gG> + |0B>) / sqrt 2
};

// Throws PreconditionError unless all three frequencies agree within 1e-9 MHz,
// DomainError if both couplings vanish.
TripleResonanceModes triple_resonance_modes(const SystemParams& p);

// Bright/dark combinations of transmon and ensemble:
//   B = (g_t b + omega_e S) / omega_h,  D = (omega_e b - g_t S) / omega_h.
// In this frame the bus couples to B with omega_h and D couples to B with chi.
struct BrightDarkFrame {
  double f_B = 0.0;
  double f_D = 0.0;
  double chi = 0.0;
  double omega_h = 0.0;
  Eigen::Vector2d bright;  // amplitudes on (|eG>, |gE>)
  Eigen::Vector2d dark;
};

// Throws DomainError when g_t = omega_e = 0.
BrightDarkFrame bright_dark_transform(const SystemParams& p);

// Orthogonal matrix whose columns are |1gG>, |0B>, |0D> expressed in the
// single-excitation basis.
Eigen::Matrix3d bright_dark_rotation(const BrightDarkFrame& frame);

// Five bosonic modes (resonator, transmon with (delta/2) b+b+bb, and three
// hyperfine subensembles at f_s - alpha, f_s, f_s + alpha each coupled with
// omega_e / sqrt 3), truncated at n_max total excitations. n_max must be 1 or 2.
HamiltonianMatrix build_hyperfine(const SystemParams& p, int n_max);

// Diagonalized n-excitation block of the hyperfine model.
EigenSolution hyperfine_manifold(const SystemParams& p, int n);

// One-excitation dressed energies (relative to vacuum), ascending.
std::vector<double> one_photon_transitions(const SystemParams& p);

// Two-excitation dressed energies divided by two, ascending.
std::vector<double> two_photon_transitions(const SystemParams& p);

}  // namespace hqs
