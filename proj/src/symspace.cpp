#include "mlcav/symspace.hpp"

#include <cmath>
#include <functional>
#include <sstream>

namespace mlcav {

bool SectorKey::matches(const SectorKey& f) const {
  if (Ne && *Ne != f.Ne.value_or(-1)) return false;
  if (NA && *NA != f.NA.value_or(-1)) return false;
  if (twoM && *twoM != f.twoM.value_or(1 << 30)) return false;
  return true;
}

std::string SectorKey::str() const {
  std::ostringstream os;
  os << "(Ne=" << (Ne ? std::to_string(*Ne) : "*") << ",NA=" << (NA ? std::to_string(*NA) : "*")
     << ",2M=" << (twoM ? std::to_string(*twoM) : "*") << ")";
  return os.str();
}

SectorKey sector_of(const LevelStructure& level, const Occupation& n) {
  int ne = 0, na = 0, tm = 0;
  for (int a = 0; a < level.ell(); ++a) {
    if (level.is_excited(a)) ne += n[a];
    if (level.in_set_A(a)) na += n[a];
    tm += n[a] * level.m_of(a).twice;
  }
  return {ne, na, tm};
}

std::size_t OccupationHash::operator()(const Occupation& n) const noexcept {
  std::size_t h = 1469598103934665603ull;
  for (int v : n) h = (h ^ static_cast<std::size_t>(v)) * 1099511628211ull;
  return h;
}

PSBasis::PSBasis(LevelStructure level, int N, Axis axis, std::vector<Occupation> states)
    : level_(level), N_(N), axis_(axis), states_(std::move(states)) {
  index_.reserve(states_.size());
  for (std::size_t i = 0; i < states_.size(); ++i) {
    if (static_cast<int>(states_[i].size()) != level_.ell()) throw std::invalid_argument("occupation length");
    if (!index_.emplace(states_[i], static_cast<long>(i)).second) throw std::invalid_argument("duplicate occupation");
  }
}

long PSBasis::index_of(const Occupation& n) const {
  auto it = index_.find(n);
  return it == index_.end() ? -1 : it->second;
}

unsigned long long ps_dimension(int N, int ell) {
  unsigned long long r = 1;
  for (int i = 1; i < ell; ++i) r = r * static_cast<unsigned long long>(N + i) / static_cast<unsigned long long>(i);
  return r;
}

PSBasis enumerate_basis(const LevelStructure& level, int N, const std::optional<SectorKey>& sector, Axis axis,
                        const std::vector<bool>& active, std::size_t cap) {
  if (N < 1) throw std::invalid_argument("N must be >= 1");
  const int ell = level.ell();
  std::vector<bool> act = active.empty() ? std::vector<bool>(ell, true) : active;
  if (static_cast<int>(act.size()) != ell) throw std::invalid_argument("active mask length");
  std::vector<int> idx;
  for (int a = 0; a < ell; ++a)
    if (act[a]) idx.push_back(a);
  if (!sector && ps_dimension(N, static_cast<int>(idx.size())) > cap)
    throw ResourceError("basis size exceeds cap of " + std::to_string(cap) + " states");

  std::vector<Occupation> out;
  Occupation n(ell, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t pos, int left) {
    if (pos + 1 == idx.size()) {
      n[idx[pos]] = left;
      if (!sector || sector->matches(sector_of(level, n))) {
        if (out.size() >= cap) throw ResourceError("basis size exceeds cap of " + std::to_string(cap) + " states");
        out.push_back(n);
      }
      n[idx[pos]] = 0;
      return;
    }
    for (int c = left; c >= 0; --c) {
      n[idx[pos]] = c;
      rec(pos + 1, left - c);
    }
    n[idx[pos]] = 0;
  };
  if (idx.empty()) throw std::invalid_argument("no active levels");
  rec(0, N);
  return PSBasis(level, N, axis, std::move(out));
}

SpMat collective_one_body(const MatC& m, const PSBasis& from, const PSBasis& to, bool strict) {
  const int ell = from.level().ell();
  std::vector<std::pair<int, int>> nz;
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b)
      if (m(a, b) != cd(0.0, 0.0)) nz.emplace_back(a, b);
  std::vector<Eigen::Triplet<cd>> trip;
  Occupation t;
  for (std::size_t j = 0; j < from.size(); ++j) {
    const Occupation& n = from[j];
    for (auto [a, b] : nz) {
      if (n[b] == 0) continue;
      t = n;
      double amp;
      if (a == b) {
        amp = n[a];
      } else {
        amp = std::sqrt(static_cast<double>(n[b]) * (n[a] + 1));
        t[b] -= 1;
        t[a] += 1;
      }
      const long i = (a == b && &from == &to) ? static_cast<long>(j) : to.index_of(t);
      if (i < 0) {
        if (strict) throw std::out_of_range("operator leaves the target basis");
        continue;
      }
      trip.emplace_back(static_cast<int>(i), static_cast<int>(j), m(a, b) * amp);
    }
  }
  SpMat M(static_cast<long>(to.size()), static_cast<long>(from.size()));
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

SpMat collective_matrix(const CollectiveOperatorSpec& op, const PSBasis& from, const PSBasis& to, bool strict) {
  if (op.axis != from.axis() || op.axis != to.axis()) throw std::invalid_argument("operator axis differs from basis axis");
  return collective_one_body(op.raising(), from, to, strict);
}

SpMat collective_matrix(const CollectiveOperatorSpec& op, const PSBasis& basis, bool strict) {
  return collective_matrix(op, basis, basis, strict);
}

VecC product_state(const VecC& psi, const PSBasis& basis) {
  const int ell = basis.level().ell();
  const double lfN = std::lgamma(basis.N() + 1.0);
  VecC out(static_cast<long>(basis.size()));
  for (std::size_t i = 0; i < basis.size(); ++i) {
    const Occupation& n = basis[i];
    double lw = lfN;
    cd amp(1.0, 0.0);
    bool zero = false;
    for (int a = 0; a < ell; ++a) {
      if (n[a] == 0) continue;
      if (psi(a) == cd(0, 0)) {
        zero = true;
        break;
      }
      lw -= std::lgamma(n[a] + 1.0);
      amp *= std::polar(std::pow(std::abs(psi(a)), n[a]), n[a] * std::arg(psi(a)));
    }
    out(static_cast<long>(i)) = zero ? cd(0, 0) : amp * std::exp(0.5 * lw);
  }
  return out;
}

namespace {

template <class Expect>
MatC rdm_impl(const PSBasis& basis, Expect&& expect) {
  const int ell = basis.level().ell();
  MatC r = MatC::Zero(ell, ell);
  for (int a = 0; a < ell; ++a)
    for (int b = 0; b < ell; ++b) {
      MatC m = MatC::Zero(ell, ell);
      m(a, b) = 1.0;
      r(b, a) = expect(collective_one_body(m, basis, basis)) / static_cast<double>(basis.N());
    }
  return r;
}

}  // namespace

MatC one_body_rdm(const PSBasis& basis, const VecC& psi) {
  return rdm_impl(basis, [&](const SpMat& s) { return psi.dot(s * psi); });
}

MatC one_body_rdm(const PSBasis& basis, const MatC& rho) {
  return rdm_impl(basis, [&](const SpMat& s) { return (s * rho).trace(); });
}

}  // namespace mlcav
