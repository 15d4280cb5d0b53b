// Configuration-driven prepare, pulse and decay runs; sweeps and exports.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mlcav/lindblad.hpp"
#include "mlcav/semiclassical.hpp"

namespace mlcav {

inline constexpr const char* kVersion = "0.1.0";

struct ConfigError : std::runtime_error {
  std::vector<std::string> errors;
  explicit ConfigError(std::vector<std::string> e);
};

struct InitialConfig {
  Axis axis = Axis::V;
  std::string label = "g-1/2";
  std::vector<cd> amplitudes;  // overrides label when non-empty
  bool operator==(const InitialConfig&) const = default;
};

struct DriveConfig {
  std::string polarization = "R";
  std::vector<double> theta0{1.0};  // units of pi
  double phase = 0.0;
  bool operator==(const DriveConfig&) const = default;
};

struct PhysicsConfig {
  double Gamma = 1.0;
  double chi = 0.0;  // units of Gamma
  double delta_g = 0.0;
  double delta_e = 0.0;
  std::vector<std::string> jumps{"Pi", "Sigma"};
  std::vector<double> xi;  // empty: homogeneous
  double lambda_L = 0.0;
  double lambda_c = 0.0;
  int n_sites = 0;
  bool operator==(const PhysicsConfig&) const = default;
};

struct IntegrationConfig {
  double t_max = 20.0;  // N Gamma t
  double stride = 0.5;
  double rtol = 1e-8;
  double atol = 1e-10;
  bool operator==(const IntegrationConfig&) const = default;
};

struct TWAConfig {
  long n_traj = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
  int histogram_bins = 0;  // final n_e histogram; 0 disables
  bool operator==(const TWAConfig&) const = default;
};

struct EDConfig {
  std::size_t cap = kDefaultEdCap;
  bool steady_state = false;
  std::vector<std::string> distributions;  // "excitation", "imbalance:<label>:<label>"
  bool operator==(const EDConfig&) const = default;
};

struct SpectrumConfig {
  bool split_NA = true;
  bool split_M = true;
  double dark_tol = 1e-10;
  std::size_t cap = 200'000;
  bool operator==(const SpectrumConfig&) const = default;
};

struct PotentialConfig {
  double lo = 0.0;  // units of pi
  double hi = 8.0;
  double step = 0.01;
  std::string orthogonal;  // empty: polarization orthogonal to the drive
  bool dark_search = false;
  int n_starts = 256;
  std::uint64_t seed = 7;
  bool operator==(const PotentialConfig&) const = default;
};

struct OutputConfig {
  std::string dir = "out";
  std::string prefix = "run";
  bool operator==(const OutputConfig&) const = default;
};

struct ScenarioConfig {
  double Fg = 0.5;
  double Fe = 1.5;
  Axis axis = Axis::Par;  // working axis
  std::vector<int> N{8};
  InitialConfig initial;
  DriveConfig drive;
  std::string method = "mf";  // ed, mf, twa, cumulant, theta-ode
  PhysicsConfig physics;
  IntegrationConfig integration;
  TWAConfig twa;
  EDConfig ed;
  SpectrumConfig spectrum;
  PotentialConfig potential;
  OutputConfig outputs;
  nlohmann::json grid = nlohmann::json::object();  // dotted key -> list of values
  int sweep_threads = 1;

  bool operator==(const ScenarioConfig&) const = default;
  LevelStructure level() const { return LevelStructure::from_doubles(Fg, Fe); }
};

// Parsing collects every problem; throws ConfigError.
ScenarioConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ScenarioConfig& c);
ScenarioConfig load_config(const std::string& path);

// Semantic checks; empty when valid.
std::vector<std::string> validate(const ScenarioConfig& c);

std::string config_hash(const ScenarioConfig& c);
nlohmann::json conventions();

// Site weights from the explicit list or the lattice parameters.
std::vector<double> site_weights(const ScenarioConfig& c);
GeneratorSpec make_generator(const ScenarioConfig& c);
CollectiveOperatorSpec make_drive(const ScenarioConfig& c);
CollectiveOperatorSpec make_polarization_op(const ScenarioConfig& c, const std::string& name);
VecC initial_state(const ScenarioConfig& c);  // working-axis amplitudes, before the pulse
std::vector<double> time_grid(const ScenarioConfig& c);

struct RunOutput {
  SeriesRecord series;
  std::vector<std::pair<std::string, std::map<double, double>>> distributions;
};

// One (N, theta0) cell; theta0 in units of pi.
RunOutput simulate(const ScenarioConfig& c, int N, double theta0);

void write_series_csv(std::ostream& os, const SeriesRecord& r, const LevelStructure& level, const std::string& manifest);
void write_distribution_csv(std::ostream& os, const std::map<double, double>& d, const std::string& manifest);

// Writes outputs under c.outputs.dir and returns the manifest.
nlohmann::json run(const ScenarioConfig& c);
nlohmann::json sweep(const ScenarioConfig& c);
nlohmann::json export_spectrum(const ScenarioConfig& c);
nlohmann::json export_potential(const ScenarioConfig& c);

}  // namespace mlcav
