// Exact master-equation evolution on the permutationally symmetric basis.
#pragma once

#include <functional>
#include <map>
#include <memory>

#include "mlcav/generator.hpp"
#include "mlcav/ode.hpp"
#include "mlcav/symspace.hpp"

namespace mlcav {

constexpr std::size_t kDefaultEdCap = 5000;

struct PSDensityMatrix {
  std::shared_ptr<const PSBasis> basis;
  MatC rho;
  double t = 0.0;
};

// Block-diagonal state; blocks carry distinct values of a conserved label.
struct EDState {
  std::vector<PSDensityMatrix> blocks;
  double trace() const;
};

struct EDOptions {
  std::vector<bool> active;    // empty: every level
  bool split_sectors = true;   // split by N_A when every term conserves it
  std::size_t cap = kDefaultEdCap;
};

// psi^{(x)N} with single-atom psi in gen.axis coordinates; coherences between
// N_A sectors are dropped when the generator conserves N_A.
EDState ed_product_state(const GeneratorSpec& gen, int N, const VecC& psi, const EDOptions& opt = {});
EDState ed_from_pure(std::shared_ptr<const PSBasis> basis, const VecC& amp);

bool conserves_set_A(const GeneratorSpec& gen);

void apply_pulse(PSDensityMatrix& rho, const CollectiveOperatorSpec& op, double theta0, double phase = 0.0);
void apply_pulse(EDState& s, const CollectiveOperatorSpec& op, double theta0, double phase = 0.0);

struct EDObservables {
  double t_scaled = 0.0;
  double n_e = 0.0;
  std::vector<double> pops;           // per level, divided by N
  std::map<std::string, double> I;    // <D+D-> keyed by Pi, Sigma, L, R
  double trace = 0.0;
  double min_eig = 0.0;
};

EDObservables observables(const EDState& s, const GeneratorSpec& gen);

// Probability distribution of n_a - n_b over diagonal occupations.
std::map<int, double> imbalance_distribution(const EDState& s, int a, int b);
std::map<int, double> excitation_distribution(const EDState& s);

using EDCallback = std::function<void(const EDObservables&)>;

// t_grid in units of N Gamma t; blocks are integrated independently and the callback
// receives aggregated observables at each grid point. s holds the final state on return.
void evolve(EDState& s, const GeneratorSpec& gen, const std::vector<double>& t_grid, const EDCallback& cb,
            const OdeOptions& opt = {});

// Exact t -> infinity limit for generators without one-body terms (cascade over N_e).
EDState steady_state(const EDState& s, const GeneratorSpec& gen, double dark_tol = 1e-10);

}  // namespace mlcav
