#pragma once

#include <array>
#include <vector>

namespace psim {

namespace constants {
inline constexpr double k_B = 1.380649e-23;       // J/K
inline constexpr double q = 1.602176634e-19;      // C
}  // namespace constants

struct DimensionlessParams {
  double lambda = 1.0;
  double nu = 1.0;
  double delta = 1.0;
  double gamma = 1.0;
  int z_a = 1;
  static constexpr int z_n = -1;
  static constexpr int z_p = 1;

  void validate() const;
};

struct RecombinationParams {
  bool enabled = false;
  double r0 = 0.0;
  double tau_n = 0.0;
  double tau_p = 0.0;
  double n_n_tau = 0.0;
  double n_p_tau = 0.0;
  // use tau_n in the hole term of the SRH denominator
  bool srh_standard_lifetimes = false;

  void validate() const;
};

struct RecombinationValue {
  double R = 0.0;
  double dR_dnn = 0.0;
  double dR_dnp = 0.0;
  double dR_dphin = 0.0;
  double dR_dphip = 0.0;
};

double recombination_rate(const RecombinationParams& p, double n_n, double n_p, double phi_n,
                          double phi_p);
RecombinationValue recombination_with_derivatives(const RecombinationParams& p, double n_n,
                                                  double n_p, double phi_n, double phi_p);

/// Region-wise dimensionless coefficients relative to the scaling factors.
/// Band edges are divided by k_B T.
struct RegionCoefficients {
  double eps = 1.0;
  double mu_n = 1.0;
  double mu_p = 1.0;
  double mu_a = 1.0;
  double N_n = 1.0;
  double N_p = 1.0;
  double N_a = 1.0;
  double E_n = 0.0;
  double E_p = 0.0;
  double E_a = 0.0;
};

/// One layer in physical units (cm, V, cm^-3, eV, F/cm, cm^2/(V s)).
struct LayerPhysical {
  double eps_s = 0.0;
  double mu_n = 0.0;
  double mu_p = 0.0;
  double mu_a = 0.0;
  double N_n = 0.0;
  double N_p = 0.0;
  double N_a = 0.0;
  double E_n = 0.0;
  double E_p = 0.0;
  double E_a = 0.0;
  double doping = 0.0;  // net C, signed
};

struct PhysicalParams {
  double l = 0.0;          // length scale
  double T = 0.0;
  double eps_s = 0.0;      // reference permittivity used in lambda
  double N_tilde = 0.0;
  double N_a_tilde = 0.0;
  double mu_tilde = 0.0;
  double mu_a_tilde = 0.0;
  double F_ph = 0.0;
  double alpha_g = 0.0;
  int z_a = 1;
  std::array<LayerPhysical, 3> layers{};

  double thermal_voltage() const { return constants::k_B * T / constants::q; }
  double time_scale() const { return l * l / (mu_a_tilde * thermal_voltage()); }
  void validate() const;
};

DimensionlessParams nondimensionalize(const PhysicalParams& p);

/// Dimensionless per-layer coefficients (eps, mobilities, densities of states, band edges).
std::array<RegionCoefficients, 3> region_coefficients(const PhysicalParams& p);

/// Beer-Lambert rate F_ph alpha_g exp(-alpha_g z) at each depth.
std::vector<double> generation_profile(double F_ph, double alpha_g, const std::vector<double>& depth);

}  // namespace psim
