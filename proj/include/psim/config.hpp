#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psim/system.hpp"

namespace psim {

/// Contact value: a constant or one of the whitelisted formulas.
///   const                      value
///   arcsinh_half_doping_plus   arcsinh(C_contact / 2) + value
///   charge_neutral             psi with zero local charge for phi = value
struct DirichletSpec {
  std::string formula = "const";
  double value = 0.0;
};

struct GenerationSpec {
  std::string kind = "zero";  // zero | constant | beer_lambert
  double value = 0.0;         // constant rate
  double alpha = 0.0;         // absorption per dimensionless length
  bool from_right = false;    // light enters at the right contact
  std::array<bool, 3> regions{true, true, true};
};

/// Everything needed to build a Scenario on a mesh of any resolution.
struct ModelSpec {
  std::array<double, 4> breakpoints{0.0, 1.0, 2.0, 3.0};  // dimensionless
  int nodes_per_region = 2;
  DimensionlessParams params;
  std::optional<PhysicalParams> physical;
  std::string provenance;
  StatisticsKind stat_n = StatisticsKind::Boltzmann;
  StatisticsKind stat_p = StatisticsKind::Boltzmann;
  StatisticsKind stat_a = StatisticsKind::FermiDiracMinusOne;
  std::array<RegionCoefficients, 3> coeffs{};
  std::array<double, 3> doping{};
  GenerationSpec generation;
  RecombinationParams recombination;
  std::array<bool, 3> recombination_regions{true, true, true};
  // phi_left, phi_right, psi_left, psi_right
  std::array<DirichletSpec, 4> dirichlet{};
};

struct InitialSpec {
  std::string profile = "sinusoidal";  // sinusoidal | quadratic | constant | from_file
  double amplitude = 0.5;
  double phi = 0.0;  // value for the constant profile
  double phi_a = 0.0;
  // if set, phi_a is the constant giving this fraction of the anion capacity
  std::optional<double> anion_fill;
  // if set, n_a = anion_density * N_a on every intrinsic cell (phi_a follows)
  std::optional<double> anion_density;
  std::filesystem::path file;
  // if > 0, the initial state is the light-soaked state after this long
  // under the configured generation, starting from the profile above
  double light_soak = 0.0;
};

struct OutputSpec {
  std::filesystem::path directory = "out";
  std::vector<double> profile_times;
  bool svg = true;
  bool steady = true;
};

struct RunConfig {
  std::filesystem::path source;
  std::string text;  // raw config, hashed into the manifest
  ModelSpec model;
  InitialSpec initial;
  TimeGrid time;
  NewtonOptions newton;
  OutputSpec output;
  std::optional<double> equilibrium_mass;
};

/// Throws ConfigError with a message naming the offending key.
RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".");
RunConfig load_config(const std::filesystem::path& path);

Scenario instantiate(const ModelSpec& spec, int nodes_per_region);
inline Scenario instantiate(const ModelSpec& spec) { return instantiate(spec, spec.nodes_per_region); }

/// Quasi Fermi profiles from the spec; psi from the Poisson problem.
State initial_state(const Scenario& sc, const InitialSpec& init, const NewtonOptions& opts = {});

}  // namespace psim
