// Permutationally symmetric occupation basis and collective operator matrices.
#pragma once

#include <Eigen/Sparse>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "mlcav/operators.hpp"

namespace mlcav {

using Occupation = std::vector<int>;
using SpMat = Eigen::SparseMatrix<cd>;

struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SectorKey {
  std::optional<int> Ne;
  std::optional<int> NA;
  std::optional<int> twoM;  // 2 M_par

  bool matches(const SectorKey& full) const;
  auto operator<=>(const SectorKey&) const = default;
  std::string str() const;
};

SectorKey sector_of(const LevelStructure& level, const Occupation& n);

struct OccupationHash {
  std::size_t operator()(const Occupation& n) const noexcept;
};

class PSBasis {
 public:
  PSBasis(LevelStructure level, int N, Axis axis, std::vector<Occupation> states);

  const LevelStructure& level() const { return level_; }
  int N() const { return N_; }
  Axis axis() const { return axis_; }
  std::size_t size() const { return states_.size(); }
  const Occupation& operator[](std::size_t i) const { return states_[i]; }
  const std::vector<Occupation>& states() const { return states_; }
  // -1 when absent.
  long index_of(const Occupation& n) const;

 private:
  LevelStructure level_;
  int N_;
  Axis axis_;
  std::vector<Occupation> states_;
  std::unordered_map<Occupation, long, OccupationHash> index_;
};

constexpr std::size_t kDefaultBasisCap = 2'000'000;

// binomial(N+ell-1, ell-1) in exact integer arithmetic.
unsigned long long ps_dimension(int N, int ell);

// Reverse-lexicographic enumeration; `active` restricts which levels may be occupied.
PSBasis enumerate_basis(const LevelStructure& level, int N, const std::optional<SectorKey>& sector = std::nullopt,
                        Axis axis = Axis::Par, const std::vector<bool>& active = {},
                        std::size_t cap = kDefaultBasisCap);

// Matrix of sum_ab m(a,b) sigma_ab from `from` to `to`. Targets outside `to` are dropped
// unless strict, in which case they throw.
SpMat collective_one_body(const MatC& m, const PSBasis& from, const PSBasis& to, bool strict = false);
SpMat collective_matrix(const CollectiveOperatorSpec& op, const PSBasis& basis, bool strict = false);
SpMat collective_matrix(const CollectiveOperatorSpec& op, const PSBasis& from, const PSBasis& to,
                        bool strict = false);

// Amplitudes of psi^{(x)N} on the basis (single-atom psi in basis axis).
VecC product_state(const VecC& psi, const PSBasis& basis);

// Single-particle reduced density matrix (trace 1) of a pure state or density matrix.
MatC one_body_rdm(const PSBasis& basis, const VecC& psi);
MatC one_body_rdm(const PSBasis& basis, const MatC& rho);

}  // namespace mlcav
