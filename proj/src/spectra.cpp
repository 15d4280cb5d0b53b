#include "mlcav/spectra.hpp"

#include <cmath>
#include <map>
#include <ostream>

namespace mlcav {

std::vector<SpectrumBlock> effective_blocks(const LevelStructure& level, int N, const BlockOptions& opt) {
  return effective_blocks({dipole_operator(level, Polarization::L(), Axis::Par),
                           dipole_operator(level, Polarization::R(), Axis::Par)},
                          N, opt);
}

std::vector<SpectrumBlock> effective_blocks(const std::vector<CollectiveOperatorSpec>& raising, int N,
                                            const BlockOptions& opt) {
  if (raising.empty()) throw std::invalid_argument("no jump operators");
  const LevelStructure level = raising.front().level;
  const Axis axis = raising.front().axis;
  const PSBasis full = enumerate_basis(level, N, std::nullopt, axis, opt.active, opt.cap);
  std::map<SectorKey, std::vector<Occupation>> groups;
  for (const auto& n : full.states()) {
    SectorKey k = sector_of(level, n);
    if (!opt.split_NA) k.NA.reset();
    if (!opt.split_M) k.twoM.reset();
    groups[k].push_back(n);
  }
  std::vector<SpectrumBlock> out;
  for (auto& [key, states] : groups) {
    PSBasis b(level, N, axis, std::move(states));
    SpMat K(static_cast<long>(b.size()), static_cast<long>(b.size()));
    for (const auto& op : raising) {
      const SpMat Dm = collective_one_body(op.lowering(), b, full);
      K += SpMat(Dm.adjoint()) * Dm;
    }
    out.push_back({key, std::move(b), MatC(K)});
  }
  return out;
}

std::vector<EigenRecord> eigendecompose(const std::vector<SpectrumBlock>& blocks, double dark_tol) {
  std::vector<EigenRecord> out;
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    const auto& B = blocks[bi];
    Eigen::SelfAdjointEigenSolver<MatC> es(B.K);
    if (es.info() != Eigen::Success) throw std::runtime_error("eigensolver failed on block " + B.key.str());
    const double thr = dark_tol * B.basis.N();
    for (long i = 0; i < es.eigenvalues().size(); ++i) {
      EigenRecord r;
      r.k = B.key.Ne.value_or(0);
      r.key = B.key;
      r.block = bi;
      r.gamma = es.eigenvalues()(i);
      r.epsilon = r.gamma;
      r.is_dark = std::abs(r.gamma) < thr;
      if (r.is_dark) r.gamma = r.epsilon = 0.0;
      r.state = es.eigenvectors().col(i);
      out.push_back(std::move(r));
    }
  }
  return out;
}

SymState analytic_dark_state(int N, int k, int NA) {
  const int NB = N - NA;
  if (k < 1 || NA < k || NB < k) throw std::domain_error("dark state needs k >= 1 and N_A, N_B >= k");
  const LevelStructure lv = LevelStructure::from_doubles(0.5, 1.5);
  const int gm = lv.ground_index(half(-1)), gp = lv.ground_index(half(1));
  const int e1 = lv.excited_index(half(1)), e3 = lv.excited_index(half(3));
  std::vector<Occupation> states;
  VecC a(k + 1);
  double ar = 1.0;
  for (int r = 0; r <= k; ++r) {
    Occupation n(lv.ell(), 0);
    n[e1] = r;
    n[e3] = k - r;
    n[gm] = NA - r;
    n[gp] = NB - k + r;
    states.push_back(n);
    a(r) = ar;
    ar *= -std::sqrt(3.0 * (k - r) * (NB - k + r + 1) / (static_cast<double>(NA - r) * (r + 1)));
  }
  a.normalize();
  return {PSBasis(lv, N, Axis::Par, std::move(states)), a};
}

long analytic_dark_count(int N) {
  long c = 0;
  for (int k = 1; k <= N / 2; ++k) c += N - 2 * k + 1;
  return c;
}

double renyi_entropy(const MatC& rho1) {
  const double p = (rho1 * rho1).trace().real();
  return -std::log(p) / std::log(4.0);
}

double renyi_entropy(const PSBasis& basis, const VecC& psi) {
  if (std::abs(psi.norm() - 1.0) > 1e-8) throw std::domain_error("state is not normalized");
  return renyi_entropy(one_body_rdm(basis, psi));
}

void write_spectrum_csv(std::ostream& os, const LevelStructure& level, int N, const std::vector<SpectrumBlock>& blocks,
                        const std::vector<EigenRecord>& recs, const std::string& manifest) {
  os << "# manifest: " << manifest << "\n";
  os << "F_g,F_e,N,k,N_A,M_par,gamma_over_Gamma,is_dark,renyi_R1\n";
  os.precision(15);
  for (const auto& r : recs) {
    const double R1 = renyi_entropy(blocks[r.block].basis, r.state);
    os << level.Fg.value() << ',' << level.Fe.value() << ',' << N << ',' << r.k << ',' << r.key.NA.value_or(-1) << ','
       << 0.5 * r.key.twoM.value_or(0) << ',' << r.gamma << ',' << (r.is_dark ? 1 : 0) << ',' << R1 << '\n';
  }
}

}  // namespace mlcav
