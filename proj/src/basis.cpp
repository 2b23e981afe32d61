#include "hqs/basis.hpp"

#include <limits>
#include <numeric>

#include "hqs/errors.hpp"

namespace hqs {
namespace {

constexpr std::size_t kMaxBasisSize = 1'000'000;

// Appends all compositions of `remaining` into modes [pos, end) in descending
// lexicographic order.
void compose(Occupation& occ, std::size_t pos, int remaining, std::vector<Occupation>& out) {
  if (pos + 1 == occ.size()) {
    occ[pos] = remaining;
    out.push_back(occ);
    return;
  }
  for (int k = remaining; k >= 0; --k) {
    occ[pos] = k;
    compose(occ, pos + 1, remaining - k, out);
  }
  occ[pos] = 0;
}

}  // namespace

ExcitationBasis::ExcitationBasis(std::vector<std::string> modes, std::vector<Occupation> states, int n_max)
    : modes_(std::move(modes)), states_(std::move(states)), n_max_(n_max) {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (states_[i].size() != modes_.size()) throw DomainError("basis state has wrong mode count");
    if (!lookup_.emplace(states_[i], i).second) throw DomainError("duplicate basis state");
  }
}

int ExcitationBasis::total_excitation(std::size_t i) const {
  const auto& s = states_.at(i);
  return std::accumulate(s.begin(), s.end(), 0);
}

long ExcitationBasis::index_of(const Occupation& occ) const {
  auto it = lookup_.find(occ);
  return it == lookup_.end() ? -1 : static_cast<long>(it->second);
}

std::pair<std::size_t, std::size_t> ExcitationBasis::manifold(int n) const {
  std::size_t first = states_.size();
  std::size_t last = states_.size();
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (total_excitation(i) == n) {
      if (first == states_.size()) first = i;
      last = i + 1;
    }
  }
  if (first == states_.size()) return {0, 0};
  return {first, last};
}

ExcitationBasis ExcitationBasis::restrict_to_manifold(int n) const {
  auto [first, last] = manifold(n);
  return ExcitationBasis(modes_, std::vector<Occupation>(states_.begin() + first, states_.begin() + last), n);
}

std::size_t basis_size(int mode_count, int n_max) {
  // C(mode_count + n_max, n_max), computed incrementally with saturation.
  std::size_t count = 1;
  for (int k = 1; k <= n_max; ++k) {
    const std::size_t num = static_cast<std::size_t>(mode_count + k);
    if (count > std::numeric_limits<std::size_t>::max() / num) return std::numeric_limits<std::size_t>::max();
    count = count * num / static_cast<std::size_t>(k);
  }
  return count;
}

ExcitationBasis enumerate_basis(std::vector<std::string> modes, int n_max) {
  const int mode_count = static_cast<int>(modes.size());
  if (mode_count < 1) throw DomainError("enumerate_basis: mode_count must be >= 1");
  if (n_max < 0) throw DomainError("enumerate_basis: n_max must be >= 0");
  if (basis_size(mode_count, n_max) > kMaxBasisSize)
    throw ResourceError("enumerate_basis: basis would exceed 10^6 states");

  std::vector<Occupation> states;
  Occupation occ(static_cast<std::size_t>(mode_count), 0);
  for (int n = 0; n <= n_max; ++n) compose(occ, 0, n, states);
  return ExcitationBasis(std::move(modes), std::move(states), n_max);
}

ExcitationBasis enumerate_basis(int mode_count, int n_max) {
  if (mode_count < 1) throw DomainError("enumerate_basis: mode_count must be >= 1");
  std::vector<std::string> modes;
  for (int i = 0; i < mode_count; ++i) modes.push_back("mode" + std::to_string(i));
  return enumerate_basis(std::move(modes), n_max);
}

}  // namespace hqs
