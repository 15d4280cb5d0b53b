#include "mlcav/operators.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlcav {

Polarization Polarization::R() { return {cd(-1.0 / std::numbers::sqrt2, 0), cd(0, 1.0 / std::numbers::sqrt2)}; }
Polarization Polarization::L() { return {cd(1.0 / std::numbers::sqrt2, 0), cd(0, 1.0 / std::numbers::sqrt2)}; }

Polarization Polarization::from_name(const std::string& name) {
  if (name == "V" || name == "Pi") return V();
  if (name == "H" || name == "Sigma") return H();
  if (name == "R") return R();
  if (name == "L") return L();
  throw std::invalid_argument("unknown polarization: " + name);
}

MatC CollectiveOperatorSpec::raising() const {
  MatC d = MatC::Zero(level.ell(), level.ell());
  for (const auto& t : terms) d(t.e, t.g) += t.amp;
  return d;
}

CollectiveOperatorSpec CollectiveOperatorSpec::from_matrix(const LevelStructure& level, Axis axis, const MatC& m,
                                                           double tol) {
  CollectiveOperatorSpec op{level, axis, {}};
  const int ng = level.n_ground();
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) {
      if (std::abs(m(i, j)) <= tol) continue;
      if (i < ng || j >= ng) throw std::domain_error("operator has non ground-to-excited elements");
      op.terms.push_back({i, j, m(i, j)});
    }
  return op;
}

CollectiveOperatorSpec CollectiveOperatorSpec::scaled(cd s) const {
  CollectiveOperatorSpec out = *this;
  for (auto& t : out.terms) t.amp *= s;
  return out;
}

CollectiveOperatorSpec dipole_operator(const LevelStructure& level, const Polarization& pol, Axis axis) {
  if (std::abs(pol.norm() - 1.0) > 1e-10) throw std::domain_error("polarization is not normalized");
  CollectiveOperatorSpec op{level, Axis::V, {}};
  const cd wv = std::conj(pol.v), wh = std::conj(pol.h);
  const double s = 1.0 / std::numbers::sqrt2;
  for (int tm = -level.Fg.twice; tm <= level.Fg.twice; tm += 2) {
    const HalfInt m{tm};
    const int g = level.ground_index(m);
    for (int p = -1; p <= 1; ++p) {
      const HalfInt me{tm + 2 * p};
      if (std::abs(me.twice) > level.Fe.twice) continue;
      const double c = clebsch_gordan(level.Fg, m, HalfInt{2 * p}, level.Fe);
      if (c == 0.0) continue;
      // conj(e_p) . eps: z-component for p = 0, i/sqrt2 on eps_H for p = +-1.
      const cd amp = (p == 0) ? wv * c : wh * cd(0, s) * c;
      if (std::abs(amp) > 0) op.terms.push_back({level.excited_index(me), g, amp});
    }
  }
  return operator_in_basis(op, axis);
}

CollectiveOperatorSpec two_level_raising() {
  const LevelStructure lv(half(0), half(0));
  return {lv, Axis::V, {{1, 0, cd(1.0, 0.0)}}};
}

CollectiveOperatorSpec operator_in_basis(const CollectiveOperatorSpec& op, Axis to) {
  if (op.axis == to) return op;
  const MatC U = basis_change(op.level, op.axis, to);
  return CollectiveOperatorSpec::from_matrix(op.level, to, U * op.raising() * U.adjoint());
}

CollectiveOperatorSpec add(const CollectiveOperatorSpec& a, const CollectiveOperatorSpec& b) {
  if (!(a.level == b.level)) throw std::invalid_argument("level structures differ");
  const auto bb = operator_in_basis(b, a.axis);
  return CollectiveOperatorSpec::from_matrix(a.level, a.axis, a.raising() + bb.raising());
}

MatC Decomposition::reassemble() const {
  MatC d = MatC::Zero(level.ell(), level.ell());
  for (const auto& p : pairs) d += p.c * basis.col(p.e) * basis.col(p.g).adjoint();
  return d;
}

namespace {

// Orthonormal vectors spanning `sub` ordered by overlap with the reference columns.
MatC align_subspace(const MatC& sub, const MatC& ref) {
  const int k = static_cast<int>(sub.cols());
  MatC P = sub * (sub.adjoint() * ref);  // projections of reference vectors
  std::vector<int> order(ref.cols());
  for (int i = 0; i < static_cast<int>(order.size()); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return P.col(a).norm() > P.col(b).norm(); });
  MatC out(sub.rows(), k);
  int n = 0;
  for (int idx : order) {
    if (n == k) break;
    VecC v = P.col(idx);
    for (int j = 0; j < n; ++j) v -= out.col(j) * (out.col(j).adjoint() * v)(0);
    const double nv = v.norm();
    if (nv < 1e-8) continue;
    out.col(n++) = v / nv;
  }
  if (n < k) throw std::runtime_error("degenerate subspace alignment failed");
  return out;
}

}  // namespace

Decomposition multi_two_level(const CollectiveOperatorSpec& op, double tol) {
  const LevelStructure& lv = op.level;
  const int ng = lv.n_ground(), ne = lv.n_excited(), ell = lv.ell();
  Decomposition out{lv, op.axis, MatC::Identity(ell, ell), {}};

  std::vector<int> row_use(ell, 0), col_use(ell, 0);
  for (const auto& t : op.terms) {
    if (t.e < ng || t.g >= ng) throw std::domain_error("corrupt operator: not ground-to-excited");
    if (std::abs(t.amp) > tol) ++row_use[t.e], ++col_use[t.g];
  }
  const bool disjoint = std::all_of(row_use.begin(), row_use.end(), [](int u) { return u <= 1; }) &&
                        std::all_of(col_use.begin(), col_use.end(), [](int u) { return u <= 1; });
  if (disjoint) {
    for (const auto& t : op.terms) {
      if (std::abs(t.amp) <= tol) continue;
      double c;
      if (std::abs(t.amp.imag()) <= tol) {
        c = t.amp.real();
      } else {
        c = std::abs(t.amp);
        out.basis(t.e, t.e) = t.amp / c;
      }
      out.pairs.push_back({t.g, t.e, c});
    }
    std::sort(out.pairs.begin(), out.pairs.end(), [](const auto& a, const auto& b) { return a.g < b.g; });
    return out;
  }

  const MatC M = op.raising().block(ng, 0, ne, ng);
  Eigen::JacobiSVD<MatC> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd s = svd.singularValues();
  MatC Vg = svd.matrixV();
  MatC Ue = svd.matrixU();
  const int r = static_cast<int>((s.array() > tol).count());

  // Reference: parallel-basis states written in op.axis coordinates.
  const MatC Upar = basis_change(lv, Axis::Par, op.axis);
  const MatC ref_g = Upar.topLeftCorner(ng, ng);
  const MatC ref_e = Upar.bottomRightCorner(ne, ne);

  for (int i = 0; i < r;) {
    int j = i + 1;
    while (j < r && std::abs(s(j) - s(i)) < 1e-10 * std::max(1.0, s(i))) ++j;
    if (j - i > 1) Vg.middleCols(i, j - i) = align_subspace(Vg.middleCols(i, j - i), ref_g);
    for (int a = i; a < j; ++a) Ue.col(a) = M * Vg.col(a) / s(a);
    i = j;
  }
  if (ng - r > 1) Vg.rightCols(ng - r) = align_subspace(Vg.rightCols(ng - r), ref_g);
  if (ne - r > 1) Ue.rightCols(ne - r) = align_subspace(Ue.rightCols(ne - r), ref_e);

  out.basis.setZero();
  out.basis.topLeftCorner(ng, ng) = Vg;
  out.basis.bottomRightCorner(ne, ne) = Ue;
  for (int a = 0; a < r; ++a) out.pairs.push_back({a, ng + a, s(a)});
  return out;
}

}  // namespace mlcav
