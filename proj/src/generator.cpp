#include "mlcav/generator.hpp"

#include <stdexcept>

namespace mlcav {

GeneratorSpec GeneratorSpec::in_axis(Axis to) const {
  GeneratorSpec g = *this;
  g.axis = to;
  for (auto& j : g.jumps) j = operator_in_basis(j, to);
  if (has_h()) {
    const MatC U = basis_change(level, axis, to);
    g.h = U * h * U.adjoint();
  }
  return g;
}

ChiGamma chi_gamma(double g_c, double delta_c, double kappa) {
  if (!(kappa > 0)) throw std::invalid_argument("kappa must be positive");
  const double den = delta_c * delta_c + 0.25 * kappa * kappa;
  return {g_c * g_c * delta_c / den, g_c * g_c * kappa / den};
}

MatC zeeman_matrix(const LevelStructure& level, double delta_g, double delta_e, Axis axis) {
  MatC h = MatC::Zero(level.ell(), level.ell());
  for (int a = 0; a < level.ell(); ++a) h(a, a) = (level.is_excited(a) ? delta_e : delta_g) * level.m_of(a).value();
  const MatC U = basis_change(level, Axis::V, axis);
  return U * h * U.adjoint();
}

MatC drive_matrix(const CollectiveOperatorSpec& op, cd omega) {
  const MatC d = op.raising();
  return 0.5 * (omega * d + std::conj(omega) * d.adjoint());
}

MatC expm_hermitian(const MatC& H, double t) {
  Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (H + H.adjoint()));
  if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed in expm");
  const VecC ph = (es.eigenvalues().cast<cd>() * cd(0, -t)).array().exp();
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

MatC pulse_unitary(const CollectiveOperatorSpec& op, double theta0, double phase) {
  if (theta0 < 0) throw std::invalid_argument("pulse area must be non-negative");
  return expm_hermitian(drive_matrix(op, std::polar(1.0, phase)), theta0);
}

}  // namespace mlcav
