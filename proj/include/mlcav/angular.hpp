// Clebsch-Gordan coefficients, Wigner matrices and basis changes between V, H and parallel axes.
#pragma once

#include <Eigen/Dense>

#include "mlcav/level.hpp"

namespace mlcav {

using cd = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;

// <Fg,m;1,p|Fe,m+p>, Condon-Shortley phases.
double clebsch_gordan(HalfInt Fg, HalfInt m, HalfInt p, HalfInt Fe);

struct RotationSpec {
  double phi = 0.0;
  double theta = 0.0;
  double chi = 0.0;

  RotationSpec inverse() const { return {-chi, -theta, -phi}; }
};

// D(phi,theta,chi) = exp(-i phi Jz) exp(-i theta Jy) exp(-i chi Jz), m ascending.
MatC wigner_matrix(HalfInt F, const RotationSpec& rot);

// Spin matrices, m ascending.
MatC spin_jz(HalfInt F);
MatC spin_jplus(HalfInt F);
MatC spin_jx(HalfInt F);
MatC spin_jy(HalfInt F);

// Coefficient map U with psi_to = U psi_from; operators transform as U O U^dagger.
MatC basis_change(const LevelStructure& level, Axis from, Axis to);

}  // namespace mlcav
