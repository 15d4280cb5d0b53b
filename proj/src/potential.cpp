#include "mlcav/potential.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>

#include "mlcav/generator.hpp"
#include "mlcav/ode.hpp"
#include "mlcav/semiclassical.hpp"

namespace mlcav {

double PotentialSpec::value(double theta) const {
  double v = 0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    for (const auto& t : terms) v += frac[i] * t.r * std::sin(t.c * xi[i] * theta + t.phi);
  return v + offset;
}

double PotentialSpec::derivative(double theta, int k) const {
  double v = 0;
  const double shift = 0.5 * std::numbers::pi * k;
  for (std::size_t i = 0; i < xi.size(); ++i)
    for (const auto& t : terms) {
      const double w = t.c * xi[i];
      v += frac[i] * t.r * std::pow(w, k) * std::sin(w * theta + t.phi + shift);
    }
  return v;
}

double PotentialSpec::scale(int k) const {
  double s = 0;
  for (std::size_t i = 0; i < xi.size(); ++i)
    for (const auto& t : terms) s += frac[i] * t.r * std::pow(std::abs(t.c * xi[i]), k);
  return s > 0 ? s : 1.0;
}

PotentialSpec PotentialSpec::with_sites(std::vector<double> x, std::vector<double> f) const {
  if (x.size() != f.size() || x.empty()) throw std::invalid_argument("site weights and fractions differ in length");
  PotentialSpec p = *this;
  p.xi = std::move(x);
  p.frac = std::move(f);
  return p;
}

PotentialSpec potential_from_state(const VecC& psi, const CollectiveOperatorSpec& drive, double tol) {
  const auto& lv = drive.level;
  const VecC p = psi.normalized();
  double pe = 0;
  for (int a = lv.n_ground(); a < lv.ell(); ++a) pe += std::norm(p(a));
  if (pe > tol) throw std::invalid_argument("potential_from_state needs a ground-manifold state");
  const Decomposition dec = multi_two_level(drive);
  const BlochSet b = bloch_projection(p * p.adjoint(), dec);
  PotentialSpec pot;
  pot.offset = 0;
  for (std::size_t a = 0; a < b.c.size(); ++a) {
    if (b.s[a] <= tol) continue;
    pot.terms.push_back({b.s[a], b.c[a], -0.5 * std::numbers::pi});
    pot.offset += b.s[a];
  }
  return pot;
}

double rabi_excitation(const VecC& psi, const CollectiveOperatorSpec& drive, double theta) {
  const VecC p = pulse_unitary(drive, theta) * psi.normalized();
  const int ng = drive.level.n_ground();
  return p.tail(p.size() - ng).squaredNorm();
}

std::string to_string(StationaryKind k) {
  switch (k) {
    case StationaryKind::Minimum: return "minimum";
    case StationaryKind::Maximum: return "maximum";
    case StationaryKind::Saddle: return "saddle";
  }
  return "?";
}

StationaryPoint classify(const PotentialSpec& pot, double theta, int max_order) {
  if (std::abs(pot.derivative(theta, 1)) > 1e-8 * pot.scale(1))
    throw std::domain_error("not a stationary point: theta = " + std::to_string(theta));
  StationaryPoint sp;
  sp.theta = theta;
  sp.value = pot.value(theta);
  sp.order = max_order + 1;
  sp.kind = StationaryKind::Saddle;
  for (int k = 2; k <= max_order; ++k) {
    const double d = pot.derivative(theta, k);
    if (std::abs(d) > 1e-8 * pot.scale(k)) {
      sp.order = k;
      if (k % 2 == 1)
        sp.kind = StationaryKind::Saddle;
      else
        sp.kind = d > 0 ? StationaryKind::Minimum : StationaryKind::Maximum;
      break;
    }
  }
  return sp;
}

namespace {

template <class F>
double bisect(F&& f, double a, double b, double tol) {
  double fa = f(a);
  while (b - a > tol) {
    const double m = 0.5 * (a + b);
    const double fm = f(m);
    if (fm == 0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
  }
  return 0.5 * (a + b);
}

int sgn(double x) { return (x > 0) - (x < 0); }

bool near_stationary(const PotentialSpec& pot, double x) {
  return std::abs(pot.derivative(x, 1)) < 1e-9 * pot.scale(1);
}

// Zeros of V^(j), j = 1..max_order-1, inside [a, b] that are also zeros of V'.
void candidates_in(const PotentialSpec& pot, double a, double b, double tol, int max_order, std::vector<double>& out) {
  const double fa = pot.derivative(a, 1);
  if (std::abs(fa) <= 1e-14 * pot.scale(1)) out.push_back(a);
  for (int j = 1; j < max_order; ++j) {
    auto dj = [&](double x) { return pot.derivative(x, j); };
    const double ga = dj(a), gb = dj(b);
    if (ga == 0 || gb == 0 || sgn(ga) == sgn(gb)) continue;
    const double p = bisect(dj, a, b, tol);
    if (near_stationary(pot, p)) out.push_back(p);
  }
}

// Merges candidates closer than `gap`, keeping the highest-order point of each run.
std::vector<StationaryPoint> cluster(const PotentialSpec& pot, std::vector<double> cand, double gap, int max_order) {
  std::sort(cand.begin(), cand.end());
  std::vector<StationaryPoint> out;
  std::size_t i = 0;
  while (i < cand.size()) {
    std::size_t j = i + 1;
    while (j < cand.size() && cand[j] - cand[j - 1] <= gap) ++j;
    std::optional<StationaryPoint> best;
    for (std::size_t k = i; k < j; ++k) {
      try {
        const StationaryPoint sp = classify(pot, cand[k], max_order);
        if (!best || sp.order > best->order ||
            (sp.order == best->order &&
             std::abs(pot.derivative(sp.theta, 1)) < std::abs(pot.derivative(best->theta, 1))))
          best = sp;
      } catch (const std::domain_error&) {
      }
    }
    if (best) out.push_back(*best);
    i = j;
  }
  return out;
}

constexpr int kMaxOrder = 10;

}  // namespace

std::vector<StationaryPoint> find_stationary(const PotentialSpec& pot, double lo, double hi, double step, double tol) {
  if (!(hi > lo) || !(step > 0)) throw std::invalid_argument("bad scan window");
  std::vector<double> cand;
  const long n = static_cast<long>(std::ceil((hi - lo) / step));
  for (long j = 0; j < n; ++j)
    candidates_in(pot, lo + j * step, std::min(hi, lo + (j + 1) * step), tol, kMaxOrder, cand);
  if (std::abs(pot.derivative(hi, 1)) <= 1e-14 * pot.scale(1)) cand.push_back(hi);
  return cluster(pot, std::move(cand), 3 * step, kMaxOrder);
}

StationaryPoint descent_endpoint(const PotentialSpec& pot, double theta0, double max_range) {
  const double d = pot.derivative(theta0, 1);
  if (std::abs(d) <= 1e-12 * pot.scale(1)) return classify(pot, theta0);
  const double dir = d > 0 ? -1.0 : 1.0;
  constexpr double step = 1e-3;
  for (double s = 0; s < max_range; s += step) {
    double a = theta0 + dir * s, b = theta0 + dir * (s + step);
    if (a > b) std::swap(a, b);
    std::vector<double> cand;
    candidates_in(pot, a, b, 1e-12, kMaxOrder, cand);
    cand.erase(std::remove_if(cand.begin(), cand.end(), [&](double x) { return std::abs(x - theta0) <= 1e-12; }),
               cand.end());
    if (cand.empty()) continue;
    // Collect the whole run of nearby candidates on the far side of the first hit.
    const double first = dir > 0 ? *std::min_element(cand.begin(), cand.end())
                                 : *std::max_element(cand.begin(), cand.end());
    double edge = first;
    for (;;) {
      double c = edge + dir * step, e = edge + dir * 4 * step;
      if (c > e) std::swap(c, e);
      std::vector<double> more;
      candidates_in(pot, c, e, 1e-12, kMaxOrder, more);
      if (more.empty()) break;
      cand.insert(cand.end(), more.begin(), more.end());
      edge = dir > 0 ? *std::max_element(more.begin(), more.end()) : *std::min_element(more.begin(), more.end());
    }
    auto pts = cluster(pot, cand, 4 * step, kMaxOrder);
    if (pts.empty()) continue;
    return dir > 0 ? pts.front() : pts.back();
  }
  throw std::runtime_error("no stationary point within range of theta0");
}

ThetaFlow theta_flow(const PotentialSpec& pot, double theta0, const std::vector<double>& t_grid) {
  ThetaFlow f;
  f.t = t_grid;
  f.endpoint = descent_endpoint(pot, theta0);
  Eigen::VectorXd y(1);
  y(0) = theta0;
  OdeOptions o;
  o.rtol = 1e-11;
  o.atol = 1e-13;
  integrate(
      y, [&](double, const Eigen::VectorXd& x) { return Eigen::VectorXd::Constant(1, -pot.derivative(x(0), 1)); },
      t_grid,
      [&](std::size_t, double, const Eigen::VectorXd& x) {
        f.theta.push_back(x(0));
        f.n_e.push_back(pot.value(x(0)));
      },
      o);
  return f;
}

double orthogonal_curvature(const VecC& psi, const CollectiveOperatorSpec& orth, double tol) {
  const VecC p = psi.normalized();
  const cd coh = p.dot(orth.raising() * p);
  if (std::abs(coh) > tol)
    throw std::domain_error("initial orthogonal coherence is nonzero: |<D+>| = " + std::to_string(std::abs(coh)));
  const BlochSet b = bloch_projection(p * p.adjoint(), multi_two_level(orth));
  double u = 0;
  for (std::size_t a = 0; a < b.c.size(); ++a) u -= b.c[a] * b.c[a] * b.S[a].z();
  return u;
}

double rotation_curvature(const VecC& psi, const CollectiveOperatorSpec& op, double phase) {
  const VecC p = psi.normalized();
  const MatC d = op.raising();
  const cd w = std::polar(1.0, phase);
  const MatC G = 0.5 * (w * d + std::conj(w) * d.adjoint());
  const int ng = op.level.n_ground();
  MatC P = MatC::Zero(d.rows(), d.cols());
  for (int a = ng; a < op.level.ell(); ++a) P(a, a) = 1;
  const MatC C = G * (G * P - P * G) - (G * P - P * G) * G;
  return -p.dot(C * p).real();
}

double DelayEstimate::tau(double N) const {
  return logarithmic ? coefficient * std::log(N) : coefficient * std::pow(N, exponent);
}

DelayEstimate delay_time(const PotentialSpec& pot, double theta_e) {
  const StationaryPoint sp = classify(pot, theta_e);
  DelayEstimate d;
  d.order = sp.order;
  d.n = sp.order - 2;
  d.logarithmic = d.n == 0;
  d.exponent = 0.5 * d.n;
  const double a = std::abs(pot.derivative(theta_e, sp.order)) / std::tgamma(sp.order);
  if (d.logarithmic)
    d.coefficient = 0.5 / a;
  else
    d.coefficient = 1.0 / (d.n * a);
  return d;
}

namespace {

struct DarkOps {
  MatC pi, sigma;
  explicit DarkOps(const LevelStructure& lv)
      : pi(dipole_operator(lv, Polarization::V(), Axis::V).raising()),
        sigma(dipole_operator(lv, Polarization::H(), Axis::V).raising()) {}

  Eigen::Vector4d F(const VecC& p) const {
    const cd a = p.dot(pi * p), b = p.dot(sigma * p);
    return {a.real(), a.imag(), b.real(), b.imag()};
  }
};

}  // namespace

double dark_residual(const LevelStructure& level, const VecC& psi) {
  const DarkOps ops(level);
  return ops.F(psi.normalized()).cwiseAbs().maxCoeff();
}

std::string stability_tag(double a, double b, double tol) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  if (lo > tol) return "stable";
  if (hi < -tol) return "unstable";
  if (lo < -tol && hi > tol) return "saddle";
  return "marginal";
}

DarkSearchResult find_mf_dark_two_pol(const LevelStructure& level, const DarkSearchOptions& opt) {
  const DarkOps ops(level);
  const int ell = level.ell();
  std::vector<int> sup = opt.support;
  if (sup.empty())
    for (int a = 0; a < ell; ++a) sup.push_back(a);
  for (int a : sup)
    if (a < 0 || a >= ell) throw std::out_of_range("support index out of range");
  const int m = static_cast<int>(sup.size());
  const auto piop = dipole_operator(level, Polarization::V(), Axis::V);
  const auto sgop = dipole_operator(level, Polarization::H(), Axis::V);

  std::vector<std::optional<DarkSolution>> found(opt.n_starts);
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int s = next++; s < opt.n_starts; s = next++) {
      std::seed_seq sq{static_cast<std::uint32_t>(opt.seed), static_cast<std::uint32_t>(opt.seed >> 32),
                       static_cast<std::uint32_t>(s)};
      std::mt19937_64 rng(sq);
      std::normal_distribution<double> nd;
      VecC p = VecC::Zero(ell);
      for (int a : sup) p(a) = cd(nd(rng), nd(rng));
      p.normalize();
      Eigen::Vector4d F = ops.F(p);
      for (int it = 0; it < opt.max_iter && F.cwiseAbs().maxCoeff() > opt.tol; ++it) {
        const VecC dp = ops.pi * p, dpa = ops.pi.adjoint() * p;
        const VecC ds = ops.sigma * p, dsa = ops.sigma.adjoint() * p;
        Eigen::MatrixXd J(4, 2 * m);
        for (int k = 0; k < m; ++k) {
          const int j = sup[k];
          // d<D>/d Re psi_j and d<D>/d Im psi_j
          const cd pr = dp(j) + std::conj(dpa(j)), pim = cd(0, -1) * dp(j) + cd(0, 1) * std::conj(dpa(j));
          const cd sr = ds(j) + std::conj(dsa(j)), sim = cd(0, -1) * ds(j) + cd(0, 1) * std::conj(dsa(j));
          J.col(2 * k) << pr.real(), pr.imag(), sr.real(), sr.imag();
          J.col(2 * k + 1) << pim.real(), pim.imag(), sim.real(), sim.imag();
        }
        const Eigen::VectorXd step = J.completeOrthogonalDecomposition().solve(-F);
        const double f0 = F.norm();
        double lam = 1.0;
        bool moved = false;
        for (int h = 0; h < 40; ++h, lam *= 0.5) {
          VecC q = p;
          for (int k = 0; k < m; ++k) q(sup[k]) += lam * cd(step(2 * k), step(2 * k + 1));
          q.normalize();
          const Eigen::Vector4d Fq = ops.F(q);
          if (Fq.norm() < f0) {
            p = q;
            F = Fq;
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
      const double res = F.cwiseAbs().maxCoeff();
      if (res > opt.tol) continue;
      DarkSolution sol;
      sol.psi = p;
      sol.residual = res;
      sol.curvature_pi = rotation_curvature(p, piop);
      sol.curvature_sigma = rotation_curvature(p, sgop);
      sol.tag = stability_tag(sol.curvature_pi, sol.curvature_sigma, opt.curvature_tol);
      found[s] = std::move(sol);
    }
  };
  int nt = opt.threads > 0 ? opt.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  nt = std::min(nt, std::max(1, opt.n_starts));
  std::vector<std::thread> pool;
  for (int i = 1; i < nt; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  DarkSearchResult r;
  for (auto& f : found) {
    if (!f) {
      ++r.failed;
      continue;
    }
    ++r.converged;
    bool dup = false;
    for (const auto& s : r.solutions)
      if (std::norm(s.psi.dot(f->psi)) > opt.fidelity) {
        dup = true;
        break;
      }
    if (!dup) r.solutions.push_back(std::move(*f));
  }
  return r;
}

}  // namespace mlcav
