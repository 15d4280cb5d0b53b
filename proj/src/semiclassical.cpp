#include "mlcav/semiclassical.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <stdexcept>
#include <mutex>
#include <thread>

namespace mlcav {

double OneBodyState::N() const {
  double n = 0;
  for (double v : Ni) n += v;
  return n;
}

MatC OneBodyState::total() const {
  MatC t = MatC::Zero(rho.front().rows(), rho.front().cols());
  for (const auto& r : rho) t += r;
  return t;
}

OneBodyState OneBodyState::product(const VecC& psi, double N, const std::vector<double>& xi) {
  if (xi.empty()) throw std::invalid_argument("need at least one site group");
  OneBodyState s;
  const VecC p = psi.normalized();
  const double ni = N / static_cast<double>(xi.size());
  for (double w : xi) {
    s.rho.push_back(ni * p * p.adjoint());
    s.xi.push_back(w);
    s.Ni.push_back(ni);
  }
  return s;
}

MatC pack(const OneBodyState& s) {
  const long ell = s.rho.front().rows();
  MatC y(ell, ell * static_cast<long>(s.rho.size()));
  for (std::size_t i = 0; i < s.rho.size(); ++i) y.middleCols(static_cast<long>(i) * ell, ell) = s.rho[i];
  return y;
}

void unpack(const MatC& y, OneBodyState& s) {
  const long ell = y.rows();
  for (std::size_t i = 0; i < s.rho.size(); ++i) s.rho[i] = y.middleCols(static_cast<long>(i) * ell, ell);
}

MFRhs::MFRhs(const GeneratorSpec& gen, std::vector<double> xi, std::vector<double> Ni, const MFOptions& opt)
    : ell_(gen.level.ell()), Gamma_(gen.Gamma), chi_(gen.chi), xi_(std::move(xi)), Ni_(std::move(Ni)), opt_(opt) {
  Ntot_ = 0;
  for (double n : Ni_) Ntot_ += n;
  for (const auto& j : gen.jumps) {
    if (j.axis != gen.axis) throw std::invalid_argument("jump axis differs from generator axis");
    d_.push_back(j.raising());
    dd_.push_back(d_.back().adjoint());
    ddd_.push_back(d_.back() * dd_.back());
  }
  h_ = gen.has_h() ? gen.h : MatC::Zero(ell_, ell_);
}

MatC MFRhs::operator()(const MatC& y) const {
  const long ell = ell_;
  const long G = y.cols() / ell;
  std::vector<cd> delta(d_.size(), cd(0, 0));
  for (std::size_t g = 0; g < d_.size(); ++g)
    for (long i = 0; i < G; ++i)
      delta[g] += xi_[i] * (d_[g].cwiseProduct(y.middleCols(i * ell, ell).transpose())).sum();
  const double f = opt_.closure == Closure::SelfInteraction ? 1.0 - 1.0 / Ntot_ : 1.0;
  MatC hmf = MatC::Zero(ell, ell);
  for (std::size_t g = 0; g < d_.size(); ++g)
    hmf += cd(chi_, 0.5 * Gamma_) * delta[g] * dd_[g] + cd(chi_, -0.5 * Gamma_) * std::conj(delta[g]) * d_[g];
  MatC out(ell, y.cols());
  for (long i = 0; i < G; ++i) {
    const auto r = y.middleCols(i * ell, ell);
    const MatC h = h_ + (f * xi_[i]) * hmf;
    MatC hr = h * r;
    MatC dr = cd(0, -1) * (hr - hr.adjoint());
    if (opt_.closure == Closure::SelfInteraction) {
      const double w = xi_[i] * xi_[i];
      for (std::size_t g = 0; g < d_.size(); ++g) {
        const MatC kr = ddd_[g] * r;
        dr += w * (cd(0, -chi_) * (kr - kr.adjoint()) + Gamma_ * (dd_[g] * r * d_[g]) - 0.5 * Gamma_ * (kr + kr.adjoint()));
      }
    }
    out.middleCols(i * ell, ell) = dr;
  }
  return out;
}

MatC mf_rhs(const MatC& y, const std::vector<double>& xi, const std::vector<double>& Ni, const GeneratorSpec& gen,
            const MFOptions& opt) {
  return MFRhs(gen, xi, Ni, opt)(y);
}

namespace {

const char* kPolNames[4] = {"Pi", "Sigma", "L", "R"};

bool dipole_allowed(const LevelStructure& lv) { return lv.Fg.twice + lv.Fe.twice > 0; }

struct ObsOps {
  int ell;
  int ng;
  std::vector<MatC> d;     // raising matrices of Pi, Sigma, L, R in the working axis
  std::vector<MatC> comm;  // [d, d^dagger]
  explicit ObsOps(const GeneratorSpec& gen) : ell(gen.level.ell()), ng(gen.level.n_ground()) {
    if (!dipole_allowed(gen.level)) return;
    const Polarization pols[4] = {Polarization::V(), Polarization::H(), Polarization::L(), Polarization::R()};
    for (const auto& p : pols) {
      d.push_back(dipole_operator(gen.level, p, gen.axis).raising());
      comm.push_back(d.back() * d.back().adjoint() - d.back().adjoint() * d.back());
    }
  }
  int size() const { return ell + 3 + static_cast<int>(d.size()); }

  // [n_e, pops..., I..., trace, min_eig]; `weyl` adds the symmetric-ordering correction.
  void eval(const OneBodyState& s, bool weyl, double* out) const {
    const double N = s.N();
    const MatC tot = s.total();
    double ne = 0;
    for (int a = 0; a < ell; ++a) {
      out[1 + a] = tot(a, a).real() / N;
      if (a >= ng) ne += out[1 + a];
    }
    out[0] = ne;
    for (std::size_t k = 0; k < d.size(); ++k) {
      cd delta(0, 0);
      double corr = 0;
      for (std::size_t i = 0; i < s.rho.size(); ++i) {
        delta += s.xi[i] * (d[k].cwiseProduct(s.rho[i].transpose())).sum();
        if (weyl) corr += 0.5 * s.xi[i] * s.xi[i] * (comm[k].cwiseProduct(s.rho[i].transpose())).sum().real();
      }
      out[1 + ell + k] = std::norm(delta) + corr;
    }
    const int base = 1 + ell + static_cast<int>(d.size());
    out[base] = tot.trace().real() / N;
    Eigen::SelfAdjointEigenSolver<MatC> es(0.5 * (tot + tot.adjoint()) / N, Eigen::EigenvaluesOnly);
    out[base + 1] = es.eigenvalues().minCoeff();
  }

  void fill(SeriesRecord& r, const std::vector<std::vector<double>>& v) const {
    r.n_e.clear();
    r.pops.clear();
    r.trace.clear();
    r.min_eig.clear();
    r.I.clear();
    for (const auto& x : v) {
      r.n_e.push_back(x[0]);
      r.pops.emplace_back(x.begin() + 1, x.begin() + 1 + ell);
      for (std::size_t k = 0; k < d.size(); ++k) r.I[kPolNames[k]].push_back(x[1 + ell + k]);
      r.trace.push_back(x[1 + ell + d.size()]);
      r.min_eig.push_back(x[2 + ell + d.size()]);
    }
  }
};

std::vector<double> scaled_grid(const std::vector<double>& t_grid, double N, double Gamma) {
  const double sc = N * Gamma;
  if (!(sc > 0)) throw std::invalid_argument("N Gamma must be positive");
  std::vector<double> t(t_grid.size());
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = t_grid[i] / sc;
  return t;
}

}  // namespace

SeriesRecord mf_evolve(OneBodyState& state, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                       const OdeOptions& ode, const MFOptions& opt,
                       const std::function<void(double, const OneBodyState&)>& cb) {
  const ObsOps ops(gen);
  const MFRhs rhs(gen, state.xi, state.Ni, opt);
  std::vector<std::vector<double>> vals(t_grid.size(), std::vector<double>(ops.size()));
  MatC y = pack(state);
  OneBodyState tmp = state;
  integrate(
      y, [&](double, const MatC& x) { return rhs(x); }, scaled_grid(t_grid, state.N(), gen.Gamma),
      [&](std::size_t i, double, const MatC& x) {
        unpack(x, tmp);
        ops.eval(tmp, false, vals[i].data());
        if (cb) cb(t_grid[i], tmp);
      },
      ode);
  unpack(y, state);
  SeriesRecord r;
  r.t = t_grid;
  r.method = "mf";
  ops.fill(r, vals);
  return r;
}

namespace {

std::vector<MatC> gell_mann(int ell) {
  std::vector<MatC> ops;
  for (int a = 0; a < ell; ++a) {
    MatC m = MatC::Zero(ell, ell);
    m(a, a) = 1;
    ops.push_back(m);
  }
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < a; ++b) {
      MatC x = MatC::Zero(ell, ell), y = MatC::Zero(ell, ell);
      x(a, b) = x(b, a) = 0.5;
      y(a, b) = cd(0, -0.5);  // (E_ab - E_ba)/(2i)
      y(b, a) = cd(0, 0.5);
      ops.push_back(x);
      ops.push_back(y);
    }
  return ops;
}

}  // namespace

void twa_moments(const VecC& psi, double N, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const int ell = static_cast<int>(psi.size());
  const VecC p = psi.normalized();
  const auto ops = gell_mann(ell);
  const int n = static_cast<int>(ops.size());
  Eigen::VectorXd ev(n);
  std::vector<VecC> op_psi;
  for (int k = 0; k < n; ++k) {
    op_psi.push_back(ops[k] * p);
    ev(k) = p.dot(op_psi.back()).real();
  }
  cov.resize(n, n);
  for (int k = 0; k < n; ++k)
    for (int q = 0; q < n; ++q) cov(k, q) = N * (op_psi[k].dot(op_psi[q]).real() - ev(k) * ev(q));
  mu = N * ev;
}

Eigen::MatrixXd twa_factor(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (cov + cov.transpose()));
  Eigen::VectorXd lam = es.eigenvalues();
  const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
  for (long i = 0; i < lam.size(); ++i) {
    if (lam(i) < -1e-10 * scale) throw std::runtime_error("TWA covariance is not positive semidefinite");
    lam(i) = std::max(lam(i), 0.0);
  }
  return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

MatC twa_sample(const Eigen::VectorXd& mu, const Eigen::MatrixXd& factor, int ell, std::uint64_t seed, long traj) {
  std::seed_seq sq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                   static_cast<std::uint32_t>(traj), static_cast<std::uint32_t>(static_cast<std::uint64_t>(traj) >> 32)};
  std::mt19937_64 rng(sq);
  std::normal_distribution<double> nd;
  Eigen::VectorXd z(factor.cols());
  for (long i = 0; i < z.size(); ++i) z(i) = nd(rng);
  const Eigen::VectorXd x = mu + factor * z;
  MatC r(ell, ell);
  int k = 0;
  for (int a = 0; a < ell; ++a) r(a, a) = x(k++);
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < a; ++b) {
      const cd s(x(k), x(k + 1));  // <sigma_ab> = X^x + i X^y
      k += 2;
      r(b, a) = s;
      r(a, b) = std::conj(s);
    }
  return r;
}

SeriesRecord twa_ensemble(const VecC& psi, double N, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                          const TWAOptions& opt, const std::vector<double>& xi) {
  if (opt.n_traj < 1) throw std::invalid_argument("n_traj must be >= 1");
  if (xi.empty()) throw std::invalid_argument("need at least one site group");
  const long G = static_cast<long>(xi.size());
  const double Ng = N / static_cast<double>(G);
  const int ell = gen.level.ell();
  const ObsOps ops(gen);
  const int nobs = ops.size();
  const std::size_t T = t_grid.size();
  Eigen::VectorXd mu;
  Eigen::MatrixXd cov;
  twa_moments(psi, Ng, mu, cov);
  const Eigen::MatrixXd F = twa_factor(cov);
  const MFRhs rhs(gen, xi, std::vector<double>(G, Ng));
  const auto tg = scaled_grid(t_grid, N, gen.Gamma);

  constexpr long kChunk = 64;
  const long nchunks = (opt.n_traj + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> chunk_sum(nchunks, std::vector<double>(T * nobs, 0.0));
  std::vector<double> final_ne(opt.n_traj, 0.0);
  std::atomic<long> next{0};
  std::atomic<bool> failed{false};
  std::string err;
  std::mutex err_mu;

  auto worker = [&]() {
    std::vector<double> obs(nobs);
    OneBodyState st;
    st.xi = xi;
    st.Ni.assign(G, Ng);
    st.rho.assign(G, MatC());
    for (long c = next++; c < nchunks && !failed; c = next++) {
      auto& acc = chunk_sum[c];
      for (long tr = c * kChunk; tr < std::min(opt.n_traj, (c + 1) * kChunk); ++tr) {
        try {
          MatC y(ell, ell * G);
          for (long g = 0; g < G; ++g) y.middleCols(g * ell, ell) = twa_sample(mu, F, ell, opt.seed, tr * G + g);
          integrate(
              y, [&](double, const MatC& x) { return rhs(x); }, tg,
              [&](std::size_t i, double, const MatC& x) {
                unpack(x, st);
                ops.eval(st, true, obs.data());
                for (int k = 0; k < nobs; ++k) acc[i * nobs + k] += obs[k];
                if (i + 1 == T) final_ne[tr] = obs[0];
              },
              opt.ode);
        } catch (const std::exception& e) {
          std::lock_guard<std::mutex> lk(err_mu);
          failed = true;
          err = e.what();
        }
      }
    }
  };
  int nt = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nt = static_cast<int>(std::min<long>(nt, nchunks));
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failed) throw std::runtime_error("TWA trajectory failed: " + err);

  // Pairwise reduction over chunks in index order.
  std::vector<std::vector<double>> lvl = std::move(chunk_sum);
  while (lvl.size() > 1) {
    std::vector<std::vector<double>> nxt;
    for (std::size_t i = 0; i < lvl.size(); i += 2) {
      if (i + 1 == lvl.size()) {
        nxt.push_back(std::move(lvl[i]));
        continue;
      }
      for (std::size_t k = 0; k < lvl[i].size(); ++k) lvl[i][k] += lvl[i + 1][k];
      nxt.push_back(std::move(lvl[i]));
    }
    lvl = std::move(nxt);
  }
  std::vector<std::vector<double>> vals(T, std::vector<double>(nobs));
  for (std::size_t i = 0; i < T; ++i)
    for (int k = 0; k < nobs; ++k) vals[i][k] = lvl[0][i * nobs + k] / static_cast<double>(opt.n_traj);
  SeriesRecord r;
  r.t = t_grid;
  r.method = "twa";
  r.n_traj = opt.n_traj;
  r.seed = opt.seed;
  ops.fill(r, vals);
  r.final_ne = std::move(final_ne);
  return r;
}

BlochSet bloch_projection(const MatC& rho, const Decomposition& dec) {
  BlochSet b;
  for (const auto& p : dec.pairs) {
    const VecC g = dec.basis.col(p.g), e = dec.basis.col(p.e);
    const cd sp = g.dot(rho * e);  // <sigma_eg> = <g|rho|e>
    const double sz = 0.5 * (e.dot(rho * e).real() - g.dot(rho * g).real());
    Eigen::Vector3d S(sp.real(), sp.imag(), sz);
    b.c.push_back(p.c);
    b.S.push_back(S);
    b.s.push_back(S.norm());
    b.Dx += p.c * S.x();
    b.Dy += p.c * S.y();
  }
  return b;
}

void frame_components(const BlochSet& b, const Eigen::Vector2d& n, std::vector<double>& par,
                      std::vector<double>& perp) {
  const Eigen::Vector2d u = n.normalized();
  const Eigen::Vector2d w(-u.y(), u.x());
  par.clear();
  perp.clear();
  for (const auto& S : b.S) {
    par.push_back(u.x() * S.x() + u.y() * S.y());
    perp.push_back(w.x() * S.x() + w.y() * S.y());
  }
}

}  // namespace mlcav
