// mlcav: run, sweep, spectrum, potential and validate subcommands over a JSON scenario file.
#include <iostream>

#include "CLI11.hpp"
#include "mlcav/scenario.hpp"

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitResource = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collective decay of multilevel atoms in a two-polarization cavity"};
  app.set_version_flag("--version", mlcav::kVersion);
  app.require_subcommand(1);

  std::string path;
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress the manifest on stdout");
  auto* run = app.add_subcommand("run", "Prepare, pulse and decay for every (N, theta0)");
  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over the grid section, resumable");
  auto* spectrum = app.add_subcommand("spectrum", "Export effective-Hamiltonian eigen decay rates");
  auto* potential = app.add_subcommand("potential", "Export the superradiance potential and stationary points");
  auto* validate = app.add_subcommand("validate", "Check a configuration file");
  for (auto* sc : {run, sweep, spectrum, potential, validate}) {
    sc->add_option("config", path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    sc->add_flag("-q,--quiet", quiet, "Suppress the manifest on stdout");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    const mlcav::ScenarioConfig cfg = mlcav::load_config(path);
    nlohmann::json man;
    if (*validate) {
      const auto errs = mlcav::validate(cfg);
      if (!errs.empty()) throw mlcav::ConfigError(errs);
      std::cout << "ok " << mlcav::config_hash(cfg) << "\n";
      return 0;
    }
    if (*run) man = mlcav::run(cfg);
    if (*sweep) man = mlcav::sweep(cfg);
    if (*spectrum) man = mlcav::export_spectrum(cfg);
    if (*potential) man = mlcav::export_potential(cfg);
    if (!quiet) std::cout << man.dump(2) << "\n";
  } catch (const mlcav::ConfigError& e) {
    for (const auto& x : e.errors) std::cerr << "config error: " << x << "\n";
    return kExitValidation;
  } catch (const mlcav::ResourceError& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return kExitResource;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
