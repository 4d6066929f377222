#include "psim/physics.hpp"

#include <cmath>
#include <string>

#include "psim/errors.hpp"

namespace psim {

void DimensionlessParams::validate() const {
  if (!(lambda > 0.0)) throw ConfigError("lambda must be positive");
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(gamma >= 0.0)) throw ConfigError("gamma must be non-negative");
  if (z_a <= 0) throw ConfigError("z_a must be a positive integer");
}

void RecombinationParams::validate() const {
  if (r0 < 0.0 || tau_n < 0.0 || tau_p < 0.0 || n_n_tau < 0.0 || n_p_tau < 0.0)
    throw ConfigError("recombination coefficients must be non-negative");
}

RecombinationValue recombination_with_derivatives(const RecombinationParams& p, double n_n,
                                                  double n_p, double phi_n, double phi_p) {
  RecombinationValue out;
  if (!p.enabled) return out;
  const double tau2 = p.srh_standard_lifetimes ? p.tau_n : p.tau_p;
  const double den = p.tau_p * (n_n + p.n_n_tau) + tau2 * (n_p + p.n_p_tau);
  double r = p.r0, dr_dnn = 0.0, dr_dnp = 0.0;
  if (den >= 1e-300) {
    r += 1.0 / den;
    dr_dnn = -p.tau_p / (den * den);
    dr_dnp = -tau2 / (den * den);
  }
  const double e = std::exp(phi_n - phi_p);
  const double w = 1.0 - e;
  const double prod = n_n * n_p;
  out.R = r * prod * w;
  out.dR_dnn = (dr_dnn * prod + r * n_p) * w;
  out.dR_dnp = (dr_dnp * prod + r * n_n) * w;
  out.dR_dphin = -r * prod * e;
  out.dR_dphip = r * prod * e;
  return out;
}

double recombination_rate(const RecombinationParams& p, double n_n, double n_p, double phi_n,
                          double phi_p) {
  return recombination_with_derivatives(p, n_n, n_p, phi_n, phi_p).R;
}

void PhysicalParams::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("physical parameter '") + name + "' must be positive");
  };
  positive(l, "l");
  positive(T, "T");
  positive(eps_s, "eps_s");
  positive(N_tilde, "N_tilde");
  positive(N_a_tilde, "N_a_tilde");
  positive(mu_tilde, "mu_tilde");
  positive(mu_a_tilde, "mu_a_tilde");
  if (!(F_ph >= 0.0)) throw ConfigError("F_ph must be non-negative");
  if (!(alpha_g >= 0.0)) throw ConfigError("alpha_g must be non-negative");
  if (z_a <= 0) throw ConfigError("z_a must be a positive integer");
  for (const auto& layer : layers) {
    positive(layer.eps_s, "layer eps_s");
    positive(layer.mu_n, "layer mu_n");
    positive(layer.mu_p, "layer mu_p");
    positive(layer.N_n, "layer N_n");
    positive(layer.N_p, "layer N_p");
  }
  positive(layers[1].mu_a, "intrinsic mu_a");
  positive(layers[1].N_a, "intrinsic N_a");
}

DimensionlessParams nondimensionalize(const PhysicalParams& p) {
  const double UT = p.thermal_voltage();
  DimensionlessParams d;
  d.lambda = std::sqrt(p.eps_s * UT / (p.l * p.l * constants::q * p.N_a_tilde));
  d.nu = p.mu_a_tilde / p.mu_tilde;
  d.delta = p.N_tilde / p.N_a_tilde;
  d.gamma = p.F_ph * p.alpha_g * p.l * p.l / (p.mu_tilde * UT * p.N_tilde);
  d.z_a = p.z_a;
  return d;
}

std::array<RegionCoefficients, 3> region_coefficients(const PhysicalParams& p) {
  const double kT_eV = p.thermal_voltage();  // k_B T / q in volts equals k_B T in eV
  std::array<RegionCoefficients, 3> out{};
  for (int r = 0; r < 3; ++r) {
    const auto& L = p.layers[r];
    auto& c = out[r];
    c.eps = L.eps_s / p.eps_s;
    c.mu_n = L.mu_n / p.mu_tilde;
    c.mu_p = L.mu_p / p.mu_tilde;
    c.mu_a = L.mu_a > 0.0 ? L.mu_a / p.mu_a_tilde : 1.0;
    c.N_n = L.N_n / p.N_tilde;
    c.N_p = L.N_p / p.N_tilde;
    c.N_a = L.N_a > 0.0 ? L.N_a / p.N_a_tilde : 1.0;
    c.E_n = L.E_n / kT_eV;
    c.E_p = L.E_p / kT_eV;
    c.E_a = L.E_a / kT_eV;
  }
  return out;
}

std::vector<double> generation_profile(double F_ph, double alpha_g, const std::vector<double>& depth) {
  std::vector<double> g(depth.size());
  for (size_t i = 0; i < depth.size(); ++i) g[i] = F_ph * alpha_g * std::exp(-alpha_g * depth[i]);
  return g;
}

}  // namespace psim
