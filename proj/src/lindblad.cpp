#include "mlcav/lindblad.hpp"

#include <algorithm>
#include <cmath>

namespace mlcav {

double EDState::trace() const {
  double t = 0;
  for (const auto& b : blocks) t += b.rho.trace().real();
  return t;
}

bool conserves_set_A(const GeneratorSpec& gen) {
  const auto& lv = gen.level;
  for (const auto& j : gen.jumps)
    for (const auto& t : j.terms)
      if (lv.in_set_A(t.e) != lv.in_set_A(t.g)) return false;
  if (gen.has_h())
    for (int a = 0; a < lv.ell(); ++a)
      for (int b = 0; b < lv.ell(); ++b)
        if (std::abs(gen.h(a, b)) > 1e-14 && lv.in_set_A(a) != lv.in_set_A(b)) return false;
  return true;
}

EDState ed_from_pure(std::shared_ptr<const PSBasis> basis, const VecC& amp) {
  EDState s;
  s.blocks.push_back({std::move(basis), amp * amp.adjoint(), 0.0});
  return s;
}

EDState ed_product_state(const GeneratorSpec& gen, int N, const VecC& psi, const EDOptions& opt) {
  const auto& lv = gen.level;
  std::vector<bool> act = opt.active.empty() ? std::vector<bool>(lv.ell(), true) : opt.active;
  for (int a = 0; a < lv.ell(); ++a)
    if (!act[a] && std::abs(psi(a)) > 1e-12) throw std::invalid_argument("initial state occupies an inactive level");
  EDState s;
  if (opt.split_sectors && conserves_set_A(gen)) {
    for (int na = 0; na <= N; ++na) {
      auto b = std::make_shared<const PSBasis>(enumerate_basis(lv, N, SectorKey{std::nullopt, na, std::nullopt},
                                                               gen.axis, act, opt.cap));
      if (b->size() == 0) continue;
      const VecC amp = product_state(psi, *b);
      if (amp.squaredNorm() < 1e-30) continue;
      s.blocks.push_back({b, amp * amp.adjoint(), 0.0});
    }
  } else {
    auto b = std::make_shared<const PSBasis>(enumerate_basis(lv, N, std::nullopt, gen.axis, act, opt.cap));
    if (b->size() > opt.cap) throw ResourceError("ED basis exceeds cap of " + std::to_string(opt.cap));
    const VecC amp = product_state(psi, *b);
    s.blocks.push_back({b, amp * amp.adjoint(), 0.0});
  }
  return s;
}

void apply_pulse(PSDensityMatrix& r, const CollectiveOperatorSpec& op, double theta0, double phase) {
  if (op.axis != r.basis->axis()) throw std::invalid_argument("pulse operator axis differs from basis axis");
  if (theta0 < 0) throw std::invalid_argument("pulse area must be non-negative");
  if (theta0 == 0) return;
  const MatC H = MatC(collective_one_body(drive_matrix(op, std::polar(1.0, phase)), *r.basis, *r.basis));
  const MatC U = expm_hermitian(H, theta0);
  r.rho = U * r.rho * U.adjoint();
}

void apply_pulse(EDState& s, const CollectiveOperatorSpec& op, double theta0, double phase) {
  for (auto& b : s.blocks) apply_pulse(b, op, theta0, phase);
}

namespace {

const char* kObsNames[4] = {"Pi", "Sigma", "L", "R"};

bool dipole_allowed(const LevelStructure& lv) { return lv.Fg.twice + lv.Fe.twice > 0; }

struct BlockCache {
  std::vector<SpMat> Dm;  // lowering matrices of the jumps
  SpMat K;                // sum D+D-
  SpMat H;                // chi K + one-body terms
  SpMat Heff;
  Eigen::MatrixXd occ;    // size x ell occupations
  std::vector<SpMat> Kobs;
  std::vector<double> excited;  // N_e per state

  BlockCache(const PSBasis& b, const GeneratorSpec& gen) {
    const auto n = static_cast<long>(b.size());
    K = SpMat(n, n);
    for (const auto& j : gen.jumps) {
      Dm.push_back(collective_one_body(j.lowering(), b, b));
      K += SpMat(Dm.back().adjoint()) * Dm.back();
    }
    H = gen.chi * K;
    if (gen.has_h()) H += collective_one_body(gen.h, b, b);
    Heff = H - cd(0, 0.5 * gen.Gamma) * K;
    const auto& lv = b.level();
    occ.resize(n, lv.ell());
    excited.assign(n, 0.0);
    for (long i = 0; i < n; ++i)
      for (int a = 0; a < lv.ell(); ++a) {
        occ(i, a) = b[i][a];
        if (lv.is_excited(a)) excited[i] += b[i][a];
      }
    if (dipole_allowed(lv)) {
      const Polarization pols[4] = {Polarization::V(), Polarization::H(), Polarization::L(), Polarization::R()};
      for (const auto& p : pols) {
        const SpMat d = collective_one_body(dipole_operator(lv, p, b.axis()).lowering(), b, b);
        Kobs.push_back(SpMat(d.adjoint()) * d);
      }
    }
  }
};

struct Partial {
  double n_e = 0, trace = 0, min_eig = 1e300;
  std::vector<double> pops;
  double I[4] = {0, 0, 0, 0};
};

Partial block_partial(const PSDensityMatrix& r, const BlockCache& c, bool eig) {
  Partial p;
  const int N = r.basis->N();
  const Eigen::VectorXd diag = r.rho.diagonal().real();
  p.trace = diag.sum();
  p.pops.resize(c.occ.cols());
  for (long a = 0; a < c.occ.cols(); ++a) p.pops[a] = diag.dot(c.occ.col(a)) / N;
  for (long i = 0; i < diag.size(); ++i) p.n_e += diag(i) * c.excited[i] / N;
  for (std::size_t k = 0; k < c.Kobs.size(); ++k) p.I[k] = (c.Kobs[k] * r.rho).trace().real();
  if (eig && r.rho.rows() > 0) {
    Eigen::SelfAdjointEigenSolver<MatC> es(r.rho, Eigen::EigenvaluesOnly);
    p.min_eig = es.eigenvalues().minCoeff();
  }
  return p;
}

EDObservables combine(const std::vector<Partial>& parts, const LevelStructure& lv, bool dipole, double t) {
  EDObservables o;
  o.t_scaled = t;
  o.pops.assign(lv.ell(), 0.0);
  double I[4] = {0, 0, 0, 0};
  o.min_eig = 1e300;
  for (const auto& p : parts) {
    o.n_e += p.n_e;
    o.trace += p.trace;
    o.min_eig = std::min(o.min_eig, p.min_eig);
    for (int a = 0; a < lv.ell(); ++a) o.pops[a] += p.pops[a];
    for (int k = 0; k < 4; ++k) I[k] += p.I[k];
  }
  if (dipole)
    for (int k = 0; k < 4; ++k) o.I[kObsNames[k]] = I[k];
  return o;
}

}  // namespace

EDObservables observables(const EDState& s, const GeneratorSpec& gen) {
  std::vector<Partial> parts;
  for (const auto& b : s.blocks) parts.push_back(block_partial(b, BlockCache(*b.basis, gen), true));
  return combine(parts, gen.level, dipole_allowed(gen.level), s.blocks.empty() ? 0.0 : s.blocks.front().t);
}

std::map<int, double> imbalance_distribution(const EDState& s, int a, int b) {
  std::map<int, double> d;
  for (const auto& blk : s.blocks)
    for (std::size_t i = 0; i < blk.basis->size(); ++i) {
      const auto& n = (*blk.basis)[i];
      d[n[a] - n[b]] += blk.rho(static_cast<long>(i), static_cast<long>(i)).real();
    }
  return d;
}

std::map<int, double> excitation_distribution(const EDState& s) {
  std::map<int, double> d;
  for (const auto& blk : s.blocks) {
    const auto& lv = blk.basis->level();
    for (std::size_t i = 0; i < blk.basis->size(); ++i) {
      int ne = 0;
      for (int a = lv.n_ground(); a < lv.ell(); ++a) ne += (*blk.basis)[i][a];
      d[ne] += blk.rho(static_cast<long>(i), static_cast<long>(i)).real();
    }
  }
  return d;
}

void evolve(EDState& s, const GeneratorSpec& gen, const std::vector<double>& t_grid, const EDCallback& cb,
            const OdeOptions& opt) {
  if (s.blocks.empty()) return;
  const int N = s.blocks.front().basis->N();
  const double scale = N * gen.Gamma;
  if (!(scale > 0)) throw std::invalid_argument("N Gamma must be positive");
  std::vector<double> tg(t_grid.size());
  for (std::size_t i = 0; i < tg.size(); ++i) tg[i] = t_grid[i] / scale;
  std::vector<std::vector<Partial>> parts(t_grid.size());
  for (auto& blk : s.blocks) {
    const BlockCache c(*blk.basis, gen);
    auto rhs = [&](double, const MatC& rho) -> MatC {
      MatC A = c.Heff * rho;
      A *= cd(0, -1);
      MatC d = A + A.adjoint();
      for (const auto& D : c.Dm) {
        const MatC T = D * rho;
        d.noalias() += gen.Gamma * (T * SpMat(D.adjoint()));
      }
      return d;
    };
    PSDensityMatrix cur = blk;
    integrate(
        cur.rho, rhs, tg,
        [&](std::size_t i, double, const MatC& rho) {
          PSDensityMatrix snap{cur.basis, rho, tg[i]};
          parts[i].push_back(block_partial(snap, c, true));
        },
        opt);
    blk.rho = cur.rho;
    blk.t = tg.back();
  }
  if (cb)
    for (std::size_t i = 0; i < t_grid.size(); ++i)
      cb(combine(parts[i], gen.level, dipole_allowed(gen.level), t_grid[i]));
}

EDState steady_state(const EDState& s, const GeneratorSpec& gen, double dark_tol) {
  if (gen.has_h()) throw std::invalid_argument("steady_state supports only chi K Hamiltonians");
  EDState out;
  for (const auto& blk : s.blocks) {
    const PSBasis& b = *blk.basis;
    const auto& lv = b.level();
    const int N = b.N();
    std::vector<std::vector<long>> by_k(N + 1);
    for (std::size_t i = 0; i < b.size(); ++i) {
      int ne = 0;
      for (int a = lv.n_ground(); a < lv.ell(); ++a) ne += b[i][a];
      by_k[ne].push_back(static_cast<long>(i));
    }
    std::vector<MatC> Dm;
    for (const auto& j : gen.jumps) Dm.push_back(MatC(collective_one_body(j.lowering(), b, b)));
    auto sub = [](const MatC& M, const std::vector<long>& r, const std::vector<long>& c) {
      MatC o(r.size(), c.size());
      for (std::size_t i = 0; i < r.size(); ++i)
        for (std::size_t j = 0; j < c.size(); ++j) o(i, j) = M(r[i], c[j]);
      return o;
    };
    MatC rinf = MatC::Zero(b.size(), b.size());
    MatC Xprev;  // integrated rho of sector k+1
    for (int k = N; k >= 0; --k) {
      const auto& idx = by_k[k];
      if (idx.empty()) {
        Xprev.resize(0, 0);
        continue;
      }
      MatC Y = sub(blk.rho, idx, idx);
      if (k < N && Xprev.size() > 0)
        for (const auto& D : Dm) {
          const MatC Dk = sub(D, idx, by_k[k + 1]);
          Y += gen.Gamma * Dk * Xprev * Dk.adjoint();
        }
      MatC Kk = MatC::Zero(idx.size(), idx.size());
      if (k > 0)
        for (const auto& D : Dm) {
          const MatC Dk = sub(D, by_k[k - 1], idx);
          Kk += Dk.adjoint() * Dk;
        }
      Eigen::SelfAdjointEigenSolver<MatC> es(Kk);
      const MatC& V = es.eigenvectors();
      Eigen::VectorXd lam = es.eigenvalues();
      const double thr = dark_tol * N;
      MatC Yt = V.adjoint() * Y * V;
      MatC Xt = MatC::Zero(Yt.rows(), Yt.cols()), Rt = MatC::Zero(Yt.rows(), Yt.cols());
      for (long i = 0; i < Yt.rows(); ++i)
        for (long j = 0; j < Yt.cols(); ++j) {
          const bool dark = lam(i) < thr && lam(j) < thr;
          if (dark) {
            Rt(i, j) = Yt(i, j);
          } else {
            const cd a(0.5 * gen.Gamma * (lam(i) + lam(j)), gen.chi * (lam(i) - lam(j)));
            Xt(i, j) = Yt(i, j) / a;
          }
        }
      Xprev = V * Xt * V.adjoint();
      const MatC R = V * Rt * V.adjoint();
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < idx.size(); ++j) rinf(idx[i], idx[j]) = R(i, j);
    }
    out.blocks.push_back({blk.basis, rinf, std::numeric_limits<double>::infinity()});
  }
  return out;
}

}  // namespace mlcav
