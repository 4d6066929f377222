#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Sparse>

#include "psim/mesh.hpp"
#include "psim/physics.hpp"
#include "psim/statistics.hpp"

namespace psim {

/// Contact values; phi^D and psi^D are interpolated linearly in between.
struct DirichletData {
  double phi_left = 0.0;
  double phi_right = 0.0;
  double psi_left = 0.0;
  double psi_right = 0.0;

  bool constant() const { return phi_left == phi_right && psi_left == psi_right; }
};

struct Scenario {
  Mesh mesh;
  DimensionlessParams params;
  Statistics stat_n{StatisticsKind::Boltzmann};
  Statistics stat_p{StatisticsKind::Boltzmann};
  Statistics stat_a{StatisticsKind::FermiDiracMinusOne};
  std::array<RegionCoefficients, 3> coeffs{};
  std::vector<double> doping;      // C_K
  std::vector<double> generation;  // G_K
  RecombinationParams recombination;
  std::array<bool, 3> recombination_regions{true, true, true};
  DirichletData dirichlet;
  std::optional<PhysicalParams> physical;

  const RegionCoefficients& coeff(int cell) const {
    return coeffs[static_cast<int>(mesh.cells[cell].region)];
  }
  double phiD_at(double x) const;
  double psiD_at(double x) const;
  double phiD_face(int slot) const { return slot == 0 ? dirichlet.phi_left : dirichlet.phi_right; }
  double psiD_face(int slot) const { return slot == 0 ? dirichlet.psi_left : dirichlet.psi_right; }

  /// Face prefactor of a region-wise coefficient; interface faces combine the
  /// two half-distances in series.
  double face_factor(const Face& f, double RegionCoefficients::*member) const;

  double intrinsic_capacity() const;  // sum of m_K N_a over intrinsic cells
  void validate() const;
};

/// Scenario on a mesh with uniform doping, zero generation and unit coefficients.
Scenario make_basic_scenario(const Mesh& mesh);

struct State {
  std::vector<double> psi;
  std::vector<double> phi_n;
  std::vector<double> phi_p;
  std::vector<double> phi_a;  // intrinsic cells only
  double time = 0.0;
};

struct Densities {
  std::vector<double> n;
  std::vector<double> p;
  std::vector<double> a;  // intrinsic cells only
};

double density_n(const Scenario& sc, int cell, double phi, double psi);
double density_p(const Scenario& sc, int cell, double phi, double psi);
double density_a(const Scenario& sc, int cell, double phi, double psi);
/// Densities from the Dirichlet state equation at a cell or contact.
double dirichlet_density_n(const Scenario& sc, int cell, double phiD, double psiD);
double dirichlet_density_p(const Scenario& sc, int cell, double phiD, double psiD);

Densities compute_densities(const Scenario& sc, const State& st);

/// Interleaved unknown numbering (phi_n, phi_p, [phi_a], psi) per cell.
struct Layout {
  std::vector<int> offset;
  int size = 0;
  int phi_n(int k) const { return offset[k]; }
  int phi_p(int k) const { return offset[k] + 1; }
  int phi_a(int k) const { return offset[k] + 2; }
  int psi(int k, const Mesh& m) const { return offset[k] + (m.intrinsic_index[k] >= 0 ? 3 : 2); }
};

Layout make_layout(const Mesh& mesh);
Eigen::VectorXd pack(const Scenario& sc, const Layout& lay, const State& st);
void unpack(const Scenario& sc, const Layout& lay, const Eigen::VectorXd& x, State& st);

enum class AssemblyMode { Transient, Stationary };

struct ResidualSystem {
  Eigen::VectorXd residual;
  Eigen::SparseMatrix<double> jacobian;
};

struct AssemblyRequest {
  AssemblyMode mode = AssemblyMode::Transient;
  const State* old_state = nullptr;  // transient only
  double tau = 1.0;
  double anion_mass_target = 0.0;    // stationary only
  bool with_jacobian = true;
};

ResidualSystem assemble_residual(const Scenario& sc, const State& st, const AssemblyRequest& req);

/// Carrier flux J_{alpha,K,sigma} on each face as seen from cell_k (for tests).
struct FaceFluxes {
  std::vector<double> J_n, J_p, J_a;
};
FaceFluxes face_fluxes(const Scenario& sc, const State& st);

struct NewtonOptions {
  double abs_tol = 1e-15;
  double rel_tol = 0.0;
  double step_tol = 1e-11;
  int max_iters = 40;
  double damping_initial = 1.0;
  double damping_growth = 2.0;
  int max_backtracks = 12;
  double max_update = 0.0;  // per-component cap on the update, 0 = off
  double noise_tol = 0.0;   // residual accepted once the line search stalls below it
  bool row_scaling = false; // measure each row relative to its largest Jacobian entry

  void validate() const;
};

struct NewtonReport {
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Residual sup norm as the Newton loop measures it (row scaled if enabled).
double residual_measure(const Scenario& sc, const State& st, const AssemblyRequest& req, const NewtonOptions& opts);

/// Damped Newton on the coupled system; throws NoConvergence.
State newton_solve(const Scenario& sc, const State& initial, const AssemblyRequest& req,
                   const NewtonOptions& opts, NewtonReport* report = nullptr);

/// Minimizer of the convex Poisson functional for frozen quasi Fermi potentials.
std::vector<double> solve_poisson_given_qfp(const Scenario& sc, const State& qfp,
                                            const std::vector<double>& guess,
                                            std::vector<double>* functional_trace = nullptr);
double poisson_functional(const Scenario& sc, const State& st);

/// Constant phi_a (and the matching psi) such that the anion mass hits the
/// target; phi_n, phi_p are taken from qfp.  Throws MassOutOfRange.
State solve_poisson_with_anion_mass(const Scenario& sc, const State& qfp, double anion_mass_target);

State solve_equilibrium(const Scenario& sc, double anion_mass_target, const NewtonOptions& opts = {});

State solve_steady_state(const Scenario& sc, const State& initial_guess, double tau0,
                         const NewtonOptions& opts = {}, NewtonReport* report = nullptr);

struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  double step = 0.1;
  std::vector<double> steps;  // explicit list overrides the uniform step

  std::vector<double> nodes() const;
  void validate() const;
};

/// One backward Euler step of length tau from `from`, with the generation
/// raised geometrically so that each stage is a good Newton guess for the next.
State switch_on_generation(const Scenario& sc, const State& from, double tau, const NewtonOptions& opts);

using StateSink = std::function<void(const State&)>;

/// Backward Euler over the grid; the sink sees the initial state and every
/// state at the grid nodes.  Throws StepFailure.
State run_transient(const Scenario& sc, const TimeGrid& grid, const State& initial,
                    const NewtonOptions& opts, const StateSink& sink);

double anion_mass(const Scenario& sc, const State& st);

}  // namespace psim
