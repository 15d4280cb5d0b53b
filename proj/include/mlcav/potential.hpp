// Superradiance potential, stationary points, delay times and two-polarization dark states.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mlcav/operators.hpp"

namespace mlcav {

struct PotentialTerm {
  double r = 0.0;    // per-atom spin radius
  double c = 0.0;    // coupling
  double phi = 0.0;  // phase
};

// V(theta) = sum_i f_i sum_a r_a sin(c_a xi_i theta + phi_a) + offset.
struct PotentialSpec {
  std::vector<PotentialTerm> terms;
  std::vector<double> xi{1.0};    // coupling weight per site group
  std::vector<double> frac{1.0};  // atom fraction per site group
  double offset = 0.5;

  double value(double theta) const;
  double derivative(double theta, int k) const;  // k-th derivative, k >= 1
  double scale(int k) const;                     // sum f r |c xi|^k
  PotentialSpec with_sites(std::vector<double> xi, std::vector<double> frac) const;
};

// From a ground-manifold single-atom state psi (drive.axis coordinates) and the drive decomposition.
PotentialSpec potential_from_state(const VecC& psi, const CollectiveOperatorSpec& drive, double tol = 1e-10);

// Excited fraction of psi after the pulse exp(-i theta (D+ + D-)/2).
double rabi_excitation(const VecC& psi, const CollectiveOperatorSpec& drive, double theta);

enum class StationaryKind { Minimum, Maximum, Saddle };
std::string to_string(StationaryKind k);

struct StationaryPoint {
  double theta = 0.0;
  double value = 0.0;
  int order = 0;  // lowest non-vanishing derivative order
  StationaryKind kind = StationaryKind::Minimum;
};

// Classifies theta as a stationary point; throws std::domain_error if V'(theta) != 0.
StationaryPoint classify(const PotentialSpec& pot, double theta, int max_order = 10);

// Dense scan at step `step` refined by bisection to `tol`.
std::vector<StationaryPoint> find_stationary(const PotentialSpec& pot, double lo = 0.0, double hi = 25.132741228718345,
                                             double step = 1e-3, double tol = 1e-10);

struct ThetaFlow {
  std::vector<double> t;  // N Gamma t
  std::vector<double> theta;
  std::vector<double> n_e;
  StationaryPoint endpoint;
};

// d theta / d(N Gamma t) = -V'(theta).
ThetaFlow theta_flow(const PotentialSpec& pot, double theta0, const std::vector<double>& t_grid);

// First stationary point reached by gradient descent from theta0.
StationaryPoint descent_endpoint(const PotentialSpec& pot, double theta0, double max_range = 100.0);

// -sum c^2 S^z over the decomposition of `orth`, per atom; psi in orth.axis coordinates.
// Throws std::domain_error when psi carries an orthogonal coherence above tol.
double orthogonal_curvature(const VecC& psi, const CollectiveOperatorSpec& orth, double tol = 1e-9);

// Second derivative of the excited fraction along exp(-i x (e^{i phase} D+ + h.c.)/2) at x = 0.
double rotation_curvature(const VecC& psi, const CollectiveOperatorSpec& op, double phase = 0.0);

struct DelayEstimate {
  int order = 0;
  int n = 0;              // order - 2
  bool logarithmic = true;
  double exponent = 0.0;  // n / 2
  double coefficient = 0.0;
  double tau(double N) const;  // N Gamma t_D
};

DelayEstimate delay_time(const PotentialSpec& pot, double theta_e);

struct DarkSearchOptions {
  int n_starts = 256;
  std::uint64_t seed = 7;
  int threads = 0;
  int max_iter = 200;
  double tol = 1e-12;
  double fidelity = 1.0 - 1e-8;
  double curvature_tol = 1e-9;
  std::vector<int> support;  // level indices allowed to carry amplitude; empty: all
};

struct DarkSolution {
  VecC psi;  // V-axis amplitudes
  double residual = 0.0;
  double curvature_pi = 0.0;
  double curvature_sigma = 0.0;
  std::string tag;  // stable / unstable / saddle / marginal
};

struct DarkSearchResult {
  std::vector<DarkSolution> solutions;
  int converged = 0;
  int failed = 0;
};

// Max |<D+>| over Pi and Sigma for psi in V coordinates.
double dark_residual(const LevelStructure& level, const VecC& psi);
std::string stability_tag(double a, double b, double tol);
DarkSearchResult find_mf_dark_two_pol(const LevelStructure& level, const DarkSearchOptions& opt = {});

}  // namespace mlcav
