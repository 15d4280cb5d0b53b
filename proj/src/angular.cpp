#include "mlcav/angular.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mlcav {

HalfInt HalfInt::from_double(double v) {
  const double t = std::round(2.0 * v);
  if (std::abs(2.0 * v - t) > 1e-9) throw std::invalid_argument("not a half-integer: " + std::to_string(v));
  return HalfInt{static_cast<int>(t)};
}

std::string HalfInt::str() const {
  if (twice % 2 == 0) return std::to_string(twice / 2);
  return std::to_string(twice) + "/2";
}

Axis axis_from_string(const std::string& s) {
  if (s == "V") return Axis::V;
  if (s == "H") return Axis::H;
  if (s == "par" || s == "Par" || s == "parallel" || s == "∥") return Axis::Par;
  throw std::invalid_argument("unknown axis tag: " + s);
}

std::string to_string(Axis a) {
  switch (a) {
    case Axis::V: return "V";
    case Axis::H: return "H";
    case Axis::Par: return "par";
  }
  return "?";
}

LevelStructure::LevelStructure(HalfInt fg, HalfInt fe) : Fg(fg), Fe(fe) {
  if (fg.twice < 0 || fe.twice < 0) throw std::invalid_argument("negative angular momentum");
  if (std::abs(fg.twice - fe.twice) > 2) throw std::invalid_argument("|Fg - Fe| > 1 is not dipole allowed");
  if ((fg.twice - fe.twice) % 2 != 0) throw std::invalid_argument("Fg and Fe must differ by an integer");
}

LevelStructure LevelStructure::from_doubles(double fg, double fe) {
  return LevelStructure(HalfInt::from_double(fg), HalfInt::from_double(fe));
}

int LevelStructure::ground_index(HalfInt m) const {
  if (std::abs(m.twice) > Fg.twice || (m.twice - Fg.twice) % 2 != 0) throw std::out_of_range("bad ground m");
  return (m.twice + Fg.twice) / 2;
}

int LevelStructure::excited_index(HalfInt m) const {
  if (std::abs(m.twice) > Fe.twice || (m.twice - Fe.twice) % 2 != 0) throw std::out_of_range("bad excited m");
  return n_ground() + (m.twice + Fe.twice) / 2;
}

HalfInt LevelStructure::m_of(int idx) const {
  if (idx < 0 || idx >= ell()) throw std::out_of_range("level index");
  if (idx < n_ground()) return HalfInt{2 * idx - Fg.twice};
  return HalfInt{2 * (idx - n_ground()) - Fe.twice};
}

std::string LevelStructure::label(int idx) const {
  return (is_excited(idx) ? "e" : "g") + m_of(idx).str();
}

bool LevelStructure::in_set_A(int idx) const {
  // m + Fg even: ground level in A; uneven: excited level in A.
  const int s = (m_of(idx).twice + Fg.twice) / 2;
  const bool even = (s % 2 == 0);
  return is_excited(idx) ? !even : even;
}

namespace {

double fact(int n) {
  if (n < 0) return 0.0;
  return std::tgamma(n + 1.0);
}

// General <j1 m1; j2 m2 | J M> with all arguments doubled (Racah formula).
double cg_doubled(int j1, int m1, int j2, int m2, int J, int M) {
  if (m1 + m2 != M) return 0.0;
  if (std::abs(m1) > j1 || std::abs(m2) > j2 || std::abs(M) > J) return 0.0;
  if (J < std::abs(j1 - j2) || J > j1 + j2) return 0.0;
  if ((j1 + j2 + J) % 2 != 0) return 0.0;
  const int a = (j1 + j2 - J) / 2, b = (j1 - j2 + J) / 2, c = (-j1 + j2 + J) / 2;
  const double pref = std::sqrt((J + 1.0) * fact(a) * fact(b) * fact(c) / fact((j1 + j2 + J) / 2 + 1));
  const double pm = std::sqrt(fact((j1 + m1) / 2) * fact((j1 - m1) / 2) * fact((j2 + m2) / 2) *
                              fact((j2 - m2) / 2) * fact((J + M) / 2) * fact((J - M) / 2));
  double sum = 0.0;
  for (int k = 0; k <= 60; ++k) {
    const int d1 = a - k, d2 = (j1 - m1) / 2 - k, d3 = (j2 + m2) / 2 - k;
    const int d4 = (J - j2 + m1) / 2 + k, d5 = (J - j1 - m2) / 2 + k;
    if (d1 < 0 || d2 < 0 || d3 < 0) break;
    if (d4 < 0 || d5 < 0) continue;
    const double den = fact(k) * fact(d1) * fact(d2) * fact(d3) * fact(d4) * fact(d5);
    sum += ((k % 2) ? -1.0 : 1.0) / den;
  }
  return pref * pm * sum;
}

}  // namespace

double clebsch_gordan(HalfInt Fg, HalfInt m, HalfInt p, HalfInt Fe) {
  if (std::abs(Fg.twice - Fe.twice) > 2) throw std::domain_error("Fg and Fe differ by more than 1");
  if (std::abs(m.twice) > Fg.twice) throw std::domain_error("|m| > Fg");
  if (std::abs(p.twice) > 2 || p.twice % 2 != 0) return 0.0;
  return cg_doubled(Fg.twice, m.twice, 2, p.twice, Fe.twice, m.twice + p.twice);
}

MatC spin_jz(HalfInt F) {
  const int d = F.twice + 1;
  MatC J = MatC::Zero(d, d);
  for (int i = 0; i < d; ++i) J(i, i) = 0.5 * (2 * i - F.twice);
  return J;
}

MatC spin_jplus(HalfInt F) {
  const int d = F.twice + 1;
  const double f = F.value();
  MatC J = MatC::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) {
    const double m = 0.5 * (2 * i - F.twice);
    J(i + 1, i) = std::sqrt(f * (f + 1) - m * (m + 1));
  }
  return J;
}

MatC spin_jx(HalfInt F) {
  const MatC jp = spin_jplus(F);
  return 0.5 * (jp + jp.adjoint());
}

MatC spin_jy(HalfInt F) {
  const MatC jp = spin_jplus(F);
  return cd(0, -0.5) * (jp - jp.adjoint());
}

namespace {

// Wigner small-d, doubled arguments.
double small_d(int j, int mp, int m, double beta) {
  const double c = std::cos(0.5 * beta), s = std::sin(0.5 * beta);
  const double pref = std::sqrt(fact((j + mp) / 2) * fact((j - mp) / 2) * fact((j + m) / 2) * fact((j - m) / 2));
  double sum = 0.0;
  for (int k = 0; k <= j; ++k) {
    const int a = (j + m) / 2 - k, b = k, c1 = (mp - m) / 2 + k, d = (j - mp) / 2 - k;
    if (a < 0 || c1 < 0 || d < 0) continue;
    const double den = fact(a) * fact(b) * fact(c1) * fact(d);
    const int pc = (2 * j + m - mp) / 2 - 2 * k;
    const int ps = (mp - m) / 2 + 2 * k;
    sum += (((mp - m) / 2 + k) % 2 ? -1.0 : 1.0) * std::pow(c, pc) * std::pow(s, ps) / den;
  }
  return pref * sum;
}

}  // namespace

MatC wigner_matrix(HalfInt F, const RotationSpec& rot) {
  if (F.twice < 0) throw std::invalid_argument("negative F");
  const int d = F.twice + 1;
  MatC D(d, d);
  for (int i = 0; i < d; ++i) {
    const int mp = 2 * i - F.twice;
    for (int k = 0; k < d; ++k) {
      const int m = 2 * k - F.twice;
      const double ph = -0.5 * (mp * rot.phi + m * rot.chi);
      D(i, k) = std::polar(small_d(F.twice, mp, m, rot.theta), ph);
    }
  }
  return D;
}

namespace {

RotationSpec from_v(Axis a) {
  constexpr double h = std::numbers::pi / 2;
  switch (a) {
    case Axis::V: return {0, 0, 0};
    case Axis::Par: return {0, h, 0};    // exp(-i pi/2 Jy)
    case Axis::H: return {-h, h, h};     // exp(-i pi/2 Jx)
  }
  throw std::domain_error("unknown axis");
}

MatC block(const LevelStructure& level, const RotationSpec& r) {
  const int ng = level.n_ground(), ne = level.n_excited();
  MatC U = MatC::Zero(ng + ne, ng + ne);
  U.topLeftCorner(ng, ng) = wigner_matrix(level.Fg, r);
  U.bottomRightCorner(ne, ne) = wigner_matrix(level.Fe, r);
  return U;
}

}  // namespace

MatC basis_change(const LevelStructure& level, Axis from, Axis to) {
  if (from == to) return MatC::Identity(level.ell(), level.ell());
  return block(level, from_v(to)) * block(level, from_v(from)).adjoint();
}

}  // namespace mlcav
