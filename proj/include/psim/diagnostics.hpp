#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "psim/system.hpp"

namespace psim {

enum class Field { Psi, PhiN, PhiP, PhiA, N, P, A };
inline constexpr std::array<Field, 7> kAllFields{Field::Psi, Field::PhiN, Field::PhiP, Field::PhiA,
                                                 Field::N,   Field::P,    Field::A};
std::string field_name(Field f);

struct DiagnosticsRecord {
  double time = 0.0;
  double entropy_E_T = 0.0;
  double dissipation_D_T = 0.0;
  double entropy_vs_steady_E_inf = 0.0;  // NaN without a steady state
  std::array<double, 7> l2_errors{};     // squared, in kAllFields order
  double anion_mass = 0.0;
  std::optional<double> free_energy_dimensional;
};

/// Relative entropy with respect to the Dirichlet data.
double discrete_entropy(const Scenario& sc, const State& st);

double discrete_dissipation(const Scenario& sc, const State& st);

/// Relative entropy with respect to a steady state.  The dimensional form
/// (J/cm^2) needs scenario.physical.  Throws MeshMismatch.
double entropy_vs_steady(const Scenario& sc, const State& st, const State& steady, bool dimensional = false);

/// Relative free energy density of one carrier in J/cm^3 (band edge in J).
/// The linear band-edge part is kept in its own bracket so it cancels exactly.
double free_energy_h(const Statistics& stat, double kT, double N, double zE, double x, double y);

/// sum_K m_K (u_K - u_K^inf)^2 over the field's support.  Throws MeshMismatch.
double l2_error_sq(const Scenario& sc, const State& st, const State& steady, Field f);

DiagnosticsRecord make_record(const Scenario& sc, const State& st, const State* steady);

struct DecayFit {
  bool ok = false;
  double slope = 0.0;
  double intercept = 0.0;  // of log(value)
  double r2 = 0.0;
  int points = 0;
};

/// Log-linear least squares on samples in [lo_frac, hi_frac] * peak.
DecayFit fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& v, double lo_frac = 1e-12,
                               double hi_frac = 0.1);

}  // namespace psim
