// Collective decay, elastic interaction, Zeeman and drive terms shared by ED and semiclassics.
#pragma once

#include <vector>

#include "mlcav/operators.hpp"

namespace mlcav {

struct GeneratorSpec {
  LevelStructure level{half(1), half(3)};
  Axis axis = Axis::Par;
  double Gamma = 1.0;
  double chi = 0.0;
  std::vector<CollectiveOperatorSpec> jumps;  // raising operators D+_gamma
  MatC h;                                     // one-body Hamiltonian, empty when absent

  // Everything re-expressed in `to`.
  GeneratorSpec in_axis(Axis to) const;
  bool has_h() const { return h.size() > 0; }
};

struct ChiGamma {
  double chi;
  double Gamma;
};

ChiGamma chi_gamma(double g_c, double delta_c, double kappa);

// delta_g sum m sigma_gg + delta_e sum m sigma_ee in the V axis, returned in `axis`.
MatC zeeman_matrix(const LevelStructure& level, double delta_g, double delta_e, Axis axis);

// (Omega D+ + conj(Omega) D-)/2 in op.axis.
MatC drive_matrix(const CollectiveOperatorSpec& op, cd omega);

// Single-atom pulse exp(-i theta0 (e^{i phase} D+ + h.c.)/2).
MatC pulse_unitary(const CollectiveOperatorSpec& op, double theta0, double phase = 0.0);

// Hermitian matrix exponential exp(-i t H).
MatC expm_hermitian(const MatC& H, double t);

}  // namespace mlcav
