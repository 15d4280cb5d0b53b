// Mean-field, truncated-Wigner and second-order cumulant dynamics.
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mlcav/generator.hpp"
#include "mlcav/ode.hpp"
#include "mlcav/symspace.hpp"

namespace mlcav {

// rho[i] holds <sigma_ab> as rho(b, a), trace N_i.
struct OneBodyState {
  std::vector<MatC> rho;
  std::vector<double> xi;   // coupling weight per site group
  std::vector<double> Ni;   // atoms per site group

  double N() const;
  MatC total() const;       // sum over site groups
  static OneBodyState product(const VecC& psi, double N, const std::vector<double>& xi = {1.0});
};

enum class Closure { Product, SelfInteraction };

struct MFOptions {
  Closure closure = Closure::Product;  // SelfInteraction is diagnostic only
};

// Packs site groups side by side: ell x (ell * groups).
MatC pack(const OneBodyState& s);
void unpack(const MatC& y, OneBodyState& s);

class MFRhs {
 public:
  MFRhs(const GeneratorSpec& gen, std::vector<double> xi, std::vector<double> Ni, const MFOptions& opt = {});
  MatC operator()(const MatC& y) const;

 private:
  int ell_;
  double Gamma_, chi_, Ntot_;
  std::vector<MatC> d_, dd_, ddd_;  // D+, D-, D+D-
  MatC h_;
  std::vector<double> xi_, Ni_;
  MFOptions opt_;
};

MatC mf_rhs(const MatC& y, const std::vector<double>& xi, const std::vector<double>& Ni, const GeneratorSpec& gen,
            const MFOptions& opt = {});

struct SeriesRecord {
  std::vector<double> t;  // N Gamma t
  std::vector<double> n_e;
  std::vector<std::vector<double>> pops;  // [time][level]
  std::map<std::string, std::vector<double>> I;
  std::vector<double> trace;
  std::vector<double> min_eig;
  std::vector<double> final_ne;  // per trajectory (TWA)
  std::string method;
  long n_traj = 1;
  std::uint64_t seed = 0;
};

// Observables appended at every grid point; `state` keeps the final state.
SeriesRecord mf_evolve(OneBodyState& state, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                       const OdeOptions& ode = {}, const MFOptions& opt = {},
                       const std::function<void(double, const OneBodyState&)>& cb = {});

struct TWAOptions {
  long n_traj = 1000;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  OdeOptions ode{1e-7, 1e-9};
};

// Gell-Mann variable mean and covariance of psi^{(x)N}.
void twa_moments(const VecC& psi, double N, Eigen::VectorXd& mu, Eigen::MatrixXd& cov);
MatC twa_sample(const Eigen::VectorXd& mu, const Eigen::MatrixXd& factor, int ell, std::uint64_t seed, long traj);
Eigen::MatrixXd twa_factor(const Eigen::MatrixXd& cov);

// Site groups share N equally; group g of trajectory j draws from stream j * groups + g.
SeriesRecord twa_ensemble(const VecC& psi, double N, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                          const TWAOptions& opt, const std::vector<double>& xi = {1.0});

// Two-body tensor G[(a,b),(c,d)] = <sigma_ab sigma_cd>, one-body e[(a,b)] = <sigma_ab>.
struct CumulantState {
  int ell = 0;
  double N = 0;
  VecC e;
  MatC G;
  static CumulantState product(const VecC& psi, double N);
  MatC rho() const;  // rho(b, a) = <sigma_ab>
};

VecC cumulant_pack(const CumulantState& s);
void cumulant_unpack(const VecC& y, CumulantState& s);

class CumulantRhs {
 public:
  explicit CumulantRhs(const GeneratorSpec& gen);
  VecC operator()(const VecC& y) const;

 private:
  struct Jump {
    MatC d, dd;
    VecC pd, pdd;
    SpMat Tc_d, Tc_dd;  // transfer matrices of E -> [E, d] and E -> [E, d^dagger]
  };
  int ell_;
  double Gamma_, chi_;
  std::vector<Jump> jumps_;
  bool has_h_;
  SpMat Th_;
};

SeriesRecord cumulant_evolve(CumulantState& s, const GeneratorSpec& gen, const std::vector<double>& t_grid,
                             const OdeOptions& ode = {});

// Bloch vectors in a multi-two-level decomposition.
struct BlochSet {
  std::vector<double> c;
  std::vector<Eigen::Vector3d> S;
  std::vector<double> s;  // radii
  double Dx = 0, Dy = 0;  // D = sum c S^{x,y}
};

BlochSet bloch_projection(const MatC& rho, const Decomposition& dec);

// Components along (par) and perpendicular to (perp) a unit in-plane direction n.
void frame_components(const BlochSet& b, const Eigen::Vector2d& n, std::vector<double>& par,
                      std::vector<double>& perp);

}  // namespace mlcav
