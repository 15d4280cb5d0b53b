// Collective dipole operators and their multi-two-level decomposition.
#pragma once

#include <vector>

#include "mlcav/angular.hpp"

namespace mlcav {

// Cavity polarization as amplitudes on (eps_V, eps_H).
struct Polarization {
  cd v{1.0, 0.0};
  cd h{0.0, 0.0};

  static Polarization V() { return {1.0, 0.0}; }
  static Polarization H() { return {0.0, 1.0}; }
  static Polarization R();  // (-eps_V + i eps_H)/sqrt2
  static Polarization L();  // ( eps_V + i eps_H)/sqrt2
  static Polarization from_name(const std::string& name);
  double norm() const { return std::sqrt(std::norm(v) + std::norm(h)); }
};

struct Transition {
  int e = 0;  // excited level index
  int g = 0;  // ground level index
  cd amp{0.0, 0.0};
};

// Raising operator D+ = sum amp |e><g|, labelled in a given axis.
struct CollectiveOperatorSpec {
  LevelStructure level;
  Axis axis = Axis::V;
  std::vector<Transition> terms;

  // Dense single-atom matrix of D+ (ell x ell).
  MatC raising() const;
  MatC lowering() const { return raising().adjoint(); }
  static CollectiveOperatorSpec from_matrix(const LevelStructure& level, Axis axis, const MatC& raising,
                                            double tol = 1e-14);
  CollectiveOperatorSpec scaled(cd s) const;
};

// Eq. D+ = conj(eps_V) Pi+ + conj(eps_H) Sigma+, expressed in the requested axis.
CollectiveOperatorSpec dipole_operator(const LevelStructure& level, const Polarization& pol, Axis axis);

// S+ = |e><g| for the (0,0) toy two-level structure.
CollectiveOperatorSpec two_level_raising();

CollectiveOperatorSpec operator_in_basis(const CollectiveOperatorSpec& op, Axis to);

// Sum of two operators in a common axis.
CollectiveOperatorSpec add(const CollectiveOperatorSpec& a, const CollectiveOperatorSpec& b);

struct TwoLevelPair {
  int g = 0;  // column of basis
  int e = 0;  // column of basis
  double c = 0.0;
};

// Columns of basis are the new single-atom states in op.axis coordinates:
// ground states in columns [0, n_ground), excited states after.
struct Decomposition {
  LevelStructure level;
  Axis axis = Axis::V;
  MatC basis;
  std::vector<TwoLevelPair> pairs;

  MatC reassemble() const;  // sum c |e><g| in axis coordinates
};

Decomposition multi_two_level(const CollectiveOperatorSpec& op, double tol = 1e-12);

}  // namespace mlcav
