#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "psim/config.hpp"
#include "psim/diagnostics.hpp"

namespace psim {

struct GlobalOptions {
  std::optional<std::filesystem::path> out_dir;
  bool quiet = false;
  int threads = 1;
};

enum ExitCode { kExitOk = 0, kExitConfig = 1, kExitSolver = 2 };

struct SimulationResult {
  Scenario scenario;
  State initial;
  State final_state;
  std::optional<State> steady;
  std::vector<DiagnosticsRecord> records;
  std::vector<State> snapshots;  // at the requested times, in order
};

/// Reference state for the steady-state diagnostics: the equilibrium when the
/// data allow it, otherwise a pseudo-transient steady solve.
State reference_steady_state(const Scenario& sc, const State& initial, const NewtonOptions& opts);

/// Initial Poisson solve, optional steady state, transient with a record per node.
SimulationResult simulate(const RunConfig& cfg, int nodes_per_region, bool with_steady,
                          const std::vector<double>& snapshot_times = {});

struct ConvergenceRow {
  int nstar = 0;
  int nodes_per_region = 0;
  double h = 0.0;
  bool ok = false;
  std::string message;
  std::array<double, 7> error{};  // sqrt of the squared L2 distance to the reference
  std::array<double, 7> eoc{};    // NaN where undefined
  double mass_drift = 0.0;        // max relative anion mass change over the run
};

/// Runs every level and the reference, concurrently on up to `threads` workers.
std::vector<ConvergenceRow> convergence_study(const RunConfig& cfg, int nstar_min, int nstar_max, int nstar_ref,
                                              int threads, double* reference_mass_drift = nullptr);

/// max_m |mass(m) - mass(0)| / mass(0) over the records.
double mass_drift(const std::vector<DiagnosticsRecord>& records);

int cmd_run(const std::filesystem::path& config, const GlobalOptions& g);
int cmd_convergence(const std::filesystem::path& config, int nstar_min, int nstar_max, int nstar_ref,
                    const GlobalOptions& g);
int cmd_equilibrium(const std::filesystem::path& config, const GlobalOptions& g);
int cmd_steady(const std::filesystem::path& config, const GlobalOptions& g);

}  // namespace psim
