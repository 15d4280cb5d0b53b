// Sector-resolved spectrum of L+L- + R+R-, dark-state census and entanglement witnesses.
#pragma once

#include <iosfwd>

#include "mlcav/symspace.hpp"

namespace mlcav {

struct SpectrumBlock {
  SectorKey key;
  PSBasis basis;
  MatC K;  // Hermitian PSD; H_eff = (chi - i Gamma/2) K
};

struct BlockOptions {
  bool split_NA = true;
  bool split_M = true;
  std::size_t cap = 200'000;
  std::vector<bool> active;  // empty: all levels
};

// Jumps default to the L and R lowering-raising pair in the parallel axis.
std::vector<SpectrumBlock> effective_blocks(const LevelStructure& level, int N, const BlockOptions& opt = {});
std::vector<SpectrumBlock> effective_blocks(const std::vector<CollectiveOperatorSpec>& raising, int N,
                                            const BlockOptions& opt);

struct EigenRecord {
  int k = 0;
  SectorKey key;
  std::size_t block = 0;
  double gamma = 0.0;    // units of Gamma
  double epsilon = 0.0;  // units of chi
  bool is_dark = false;
  VecC state;
};

// gamma/Gamma below dark_tol * N counts as dark.
std::vector<EigenRecord> eigendecompose(const std::vector<SpectrumBlock>& blocks, double dark_tol = 1e-10);

struct SymState {
  PSBasis basis;
  VecC amp;
};

// Closed-form dark states of the (1/2,3/2) structure in the parallel axis.
SymState analytic_dark_state(int N, int k, int NA);

// Count of (1/2,3/2) dark states in the R-only manifold.
long analytic_dark_count(int N);

double renyi_entropy(const MatC& rho1);
double renyi_entropy(const PSBasis& basis, const VecC& psi);

void write_spectrum_csv(std::ostream& os, const LevelStructure& level, int N, const std::vector<SpectrumBlock>& blocks,
                        const std::vector<EigenRecord>& recs, const std::string& manifest);

}  // namespace mlcav
