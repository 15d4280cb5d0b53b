#include <cmath>
#include <stdexcept>

#include "mlcav/semiclassical.hpp"

namespace mlcav {

namespace {

VecC coeffs(const MatC& m) {
  const long ell = m.rows();
  VecC p(ell * ell);
  for (long a = 0; a < ell; ++a)
    for (long b = 0; b < ell; ++b) p(a * ell + b) = m(a, b);
  return p;
}

// Column (a,b) holds the coefficients of [E_ab, m].
SpMat transfer(const MatC& m) {
  const long ell = m.rows();
  std::vector<Eigen::Triplet<cd>> tr;
  for (long a = 0; a < ell; ++a)
    for (long b = 0; b < ell; ++b)
      for (long f = 0; f < ell; ++f) {
        if (m(b, f) != cd(0, 0)) tr.emplace_back(a * ell + f, a * ell + b, m(b, f));
        if (m(f, a) != cd(0, 0)) tr.emplace_back(f * ell + b, a * ell + b, -m(f, a));
      }
  SpMat T(ell * ell, ell * ell);
  T.setFromTriplets(tr.begin(), tr.end());
  return T;
}

}  // namespace

CumulantState CumulantState::product(const VecC& psi, double N) {
  const VecC p = psi.normalized();
  const int ell = static_cast<int>(p.size());
  CumulantState s;
  s.ell = ell;
  s.N = N;
  VecC x(ell * ell);
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b) x(a * ell + b) = std::conj(p(a)) * p(b);
  s.e = N * x;
  s.G = N * (N - 1) * x * x.transpose();
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b)
      for (int d = 0; d < ell; ++d) s.G(a * ell + b, b * ell + d) += N * x(a * ell + d);
  return s;
}

MatC CumulantState::rho() const {
  MatC r(ell, ell);
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b) r(b, a) = e(a * ell + b);
  return r;
}

VecC cumulant_pack(const CumulantState& s) {
  const long n = s.e.size();
  VecC y(n + n * n);
  y.head(n) = s.e;
  y.tail(n * n) = s.G.reshaped();
  return y;
}

void cumulant_unpack(const VecC& y, CumulantState& s) {
  const long n = static_cast<long>(s.ell) * s.ell;
  s.e = y.head(n);
  s.G = y.tail(n * n).reshaped(n, n);
}

CumulantRhs::CumulantRhs(const GeneratorSpec& gen)
    : ell_(gen.level.ell()), Gamma_(gen.Gamma), chi_(gen.chi), has_h_(gen.has_h()) {
  for (const auto& j : gen.jumps) {
    if (j.axis != gen.axis) throw std::invalid_argument("jump axis differs from generator axis");
    Jump J;
    J.d = j.raising();
    J.dd = J.d.adjoint();
    J.pd = coeffs(J.d);
    J.pdd = coeffs(J.dd);
    J.Tc_d = transfer(J.d);
    J.Tc_dd = transfer(J.dd);
    jumps_.push_back(std::move(J));
  }
  if (has_h_) Th_ = transfer(gen.h);
}

VecC CumulantRhs::operator()(const VecC& y) const {
  const long n = static_cast<long>(ell_) * ell_;
  const VecC e = y.head(n);
  const MatC G = y.tail(n * n).reshaped(n, n);
  VecC de = VecC::Zero(n);
  MatC dG = MatC::Zero(n, n);
  const cd I(0, 1);
  if (has_h_) {
    de -= I * (Th_.transpose() * e);
    dG -= I * (MatC(Th_.transpose() * G) + G * Th_);
  }
  const cd km(0.5 * Gamma_, -chi_), kp(0.5 * Gamma_, chi_);
  for (const auto& J : jumps_) {
    const cd db = (J.pdd.transpose() * e)(0);
    const cd delta = (J.pd.transpose() * e)(0);
    const MatC GTdd = G * J.Tc_dd;
    const MatC TddG = J.Tc_dd.transpose() * G;
    const MatC TdG = -(J.Tc_d.transpose() * G);  // Y'' = [D, S_ab]
    const MatC GTd = -(G * J.Tc_d);
    const VecC u = G.transpose() * J.pd;           // <D S_ab>
    const VecC w = J.Tc_dd.transpose() * e;        // <[S_ab, D-]>
    const VecC v = GTdd.transpose() * J.pd;        // <D [S_ab, D-]>
    const VecC r = G * J.pdd;                      // <S_ab D->
    const VecC s = -(J.Tc_d.transpose() * e);      // <[D, S_ab]>
    const VecC q = TdG * J.pdd;                    // <[D, S_ab] D->

    de += km * v + kp * q;

    dG += km * (u * w.transpose() + e * v.transpose() + delta * GTdd - 2.0 * delta * e * w.transpose());
    dG += km * (v * e.transpose() + w * u.transpose() + delta * TddG - 2.0 * delta * w * e.transpose());
    dG += kp * (db * TdG + q * e.transpose() + s * r.transpose() - 2.0 * db * s * e.transpose());
    dG += kp * (db * GTd + r * s.transpose() + e * q.transpose() - 2.0 * db * e * s.transpose());
  }
  VecC out(n + n * n);
  out.head(n) = de;
  out.tail(n * n) = dG.reshaped();
  return out;
}

SeriesRecord cumulant_evolve(CumulantState& s, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                             const OdeOptions& ode) {
  const CumulantRhs rhs(gen);
  const int ell = s.ell;
  const int ng = gen.level.n_ground();
  const double sc = s.N * gen.Gamma;
  if (!(sc > 0)) throw std::invalid_argument("N Gamma must be positive");
  std::vector<double> tg(t_grid.size());
  for (std::size_t i = 0; i < tg.size(); ++i) tg[i] = t_grid[i] / sc;

  const char* names[4] = {"Pi", "Sigma", "L", "R"};
  std::vector<VecC> pd, pdd;
  if (gen.level.Fg.twice + gen.level.Fe.twice > 0) {
    const Polarization pols[4] = {Polarization::V(), Polarization::H(), Polarization::L(), Polarization::R()};
    for (const auto& p : pols) {
      const MatC d = dipole_operator(gen.level, p, gen.axis).raising();
      pd.push_back(coeffs(d));
      pdd.push_back(coeffs(d.adjoint()));
    }
  }
  SeriesRecord rec;
  rec.t = t_grid;
  rec.method = "cumulant";
  VecC y = cumulant_pack(s);
  CumulantState cur = s;
  integrate(
      y, [&](double, const VecC& x) { return rhs(x); }, tg,
      [&](std::size_t, double, const VecC& x) {
        cumulant_unpack(x, cur);
        std::vector<double> pops(ell);
        double ne = 0;
        for (int a = 0; a < ell; ++a) {
          pops[a] = cur.e(a * ell + a).real() / cur.N;
          if (a >= ng) ne += pops[a];
        }
        rec.n_e.push_back(ne);
        rec.pops.push_back(pops);
        for (std::size_t k = 0; k < pd.size(); ++k)
          rec.I[names[k]].push_back((pd[k].transpose() * cur.G * pdd[k])(0).real());
        const MatC r = cur.rho() / cur.N;
        rec.trace.push_back(r.trace().real());
        Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (r + r.adjoint()), Eigen::EigenvaluesOnly);
        rec.min_eig.push_back(es.eigenvalues().minCoeff());
      },
      ode);
  cumulant_unpack(y, s);
  return rec;
}

}  // namespace mlcav
