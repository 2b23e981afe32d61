#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hqs {

using Occupation = std::vector<int>;

// Truncated Fock basis over a fixed set of bosonic modes. States are graded
// by total excitation number; within a grade they are in descending
// lexicographic order, so the first mode is excited first
// (e.g. |100>, |010>, |001> for three modes and one excitation).
class ExcitationBasis {
 public:
  ExcitationBasis() = default;
  ExcitationBasis(std::vector<std::string> modes, std::vector<Occupation> states, int n_max);

  const std::vector<std::string>& modes() const { return modes_; }
  const std::vector<Occupation>& states() const { return states_; }
  int n_max() const { return n_max_; }
  std::size_t size() const { return states_.size(); }
  std::size_t mode_count() const { return modes_.size(); }

  const Occupation& state(std::size_t i) const { return states_.at(i); }
  int total_excitation(std::size_t i) const;

  // Index of `occ`, or -1 if it is not part of the basis.
  long index_of(const Occupation& occ) const;

  // Half-open index range [first, last) of the states with `n` excitations.
  std::pair<std::size_t, std::size_t> manifold(int n) const;

  // Sub-basis containing only the n-excitation states.
  ExcitationBasis restrict_to_manifold(int n) const;

 private:
  std::vector<std::string> modes_;
  std::vector<Occupation> states_;
  int n_max_ = 0;
  std::map<Occupation, std::size_t> lookup_;
};

// All occupation vectors over `mode_count` modes with total <= n_max.
// Throws ResourceError beyond 10^6 states, DomainError on bad arguments.
ExcitationBasis enumerate_basis(int mode_count, int n_max);
ExcitationBasis enumerate_basis(std::vector<std::string> modes, int n_max);

// Number of states enumerate_basis would produce (saturates at SIZE_MAX).
std::size_t basis_size(int mode_count, int n_max);

}  // namespace hqs
