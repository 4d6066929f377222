#include "psim/commands.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <mutex>
#include <thread>

#include "psim/errors.hpp"
#include "psim/output.hpp"

namespace psim {

namespace {

bool equilibrium_data(const Scenario& sc) {
  if (!sc.dirichlet.constant()) return false;
  for (double g : sc.generation)
    if (g != 0.0) return false;
  return true;
}

std::vector<double> field_values(const Scenario& sc, const State& st, const Densities& d, Field f) {
  (void)sc;
  switch (f) {
    case Field::Psi: return st.psi;
    case Field::PhiN: return st.phi_n;
    case Field::PhiP: return st.phi_p;
    case Field::PhiA: return st.phi_a;
    case Field::N: return d.n;
    case Field::P: return d.p;
    case Field::A: return d.a;
  }
  return {};
}

bool intrinsic_field(Field f) { return f == Field::PhiA || f == Field::A; }

std::string time_label(double t) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", t);
  return buf;
}

std::filesystem::path output_dir(const RunConfig& cfg, const GlobalOptions& g) {
  return g.out_dir ? *g.out_dir : cfg.output.directory;
}

void log(const GlobalOptions& g, const std::string& msg) {
  if (!g.quiet) std::cerr << msg << "\n";
}

// Shared error handling: config problems exit 1 before anything is written,
// solver failures exit 2.
template <class F>
int guarded(const GlobalOptions& g, F&& body) {
  (void)g;
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const MassOutOfRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NoConvergence& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  } catch (const StepFailure& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kExitSolver;
  }
}

}  // namespace

State reference_steady_state(const Scenario& sc, const State& initial, const NewtonOptions& opts) {
  if (equilibrium_data(sc)) {
    State eq = solve_equilibrium(sc, anion_mass(sc, initial), opts);
    eq.time = initial.time;
    return eq;
  }
  return solve_steady_state(sc, initial, 1e-2, opts);
}

SimulationResult simulate(const RunConfig& cfg, int nodes_per_region, bool with_steady,
                          const std::vector<double>& snapshot_times) {
  SimulationResult res;
  res.scenario = instantiate(cfg.model, nodes_per_region);
  const Scenario& sc = res.scenario;
  sc.validate();
  res.initial = initial_state(sc, cfg.initial, cfg.newton);
  res.initial.time = cfg.time.t_start;
  if (with_steady) res.steady = reference_steady_state(sc, res.initial, cfg.newton);

  const double tol = 1e-9 * std::max(1.0, std::abs(cfg.time.t_end));
  size_t next_snapshot = 0;
  std::vector<double> wanted = snapshot_times;
  std::sort(wanted.begin(), wanted.end());
  const State* steady = res.steady ? &*res.steady : nullptr;
  res.final_state = run_transient(sc, cfg.time, res.initial, cfg.newton, [&](const State& s) {
    res.records.push_back(make_record(sc, s, steady));
    while (next_snapshot < wanted.size() && wanted[next_snapshot] < s.time - tol) ++next_snapshot;
    if (next_snapshot < wanted.size() && std::abs(wanted[next_snapshot] - s.time) <= tol) {
      res.snapshots.push_back(s);
      ++next_snapshot;
    }
  });
  return res;
}

double mass_drift(const std::vector<DiagnosticsRecord>& records) {
  double worst = 0.0;
  if (records.empty() || records.front().anion_mass == 0.0) return worst;
  const double m0 = records.front().anion_mass;
  for (const auto& r : records) worst = std::max(worst, std::abs(r.anion_mass - m0) / m0);
  return worst;
}

std::vector<ConvergenceRow> convergence_study(const RunConfig& cfg, int nstar_min, int nstar_max, int nstar_ref,
                                              int threads, double* reference_mass_drift) {
  if (!(nstar_min >= 2 && nstar_max >= nstar_min && nstar_ref > nstar_max))
    throw ConfigError("convergence levels need ref > max >= min >= 2");
  for (int lvl : {nstar_min, nstar_max, nstar_ref})
    if (lvl > 20) throw ConfigError("convergence levels must not exceed 20");
  // validate once on the coarsest mesh before spawning anything
  instantiate(cfg.model, nodes_for_level(nstar_min)).validate();

  std::vector<int> levels;
  levels.push_back(nstar_ref);  // largest job first
  for (int l = nstar_max; l >= nstar_min; --l) levels.push_back(l);

  struct Job {
    std::optional<SimulationResult> result;
    std::string error;
  };
  std::vector<Job> jobs(levels.size());
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next++) < levels.size();) {
      try {
        jobs[i].result = simulate(cfg, nodes_for_level(levels[i]), false);
      } catch (const std::exception& e) {
        jobs[i].error = e.what();
      }
    }
  };
  const int n = std::max(1, std::min<int>(threads, static_cast<int>(levels.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (!jobs[0].result) throw NoConvergence(0, std::nan(""));
  const SimulationResult& ref = *jobs[0].result;
  if (reference_mass_drift) *reference_mass_drift = mass_drift(ref.records);
  const Densities dref = compute_densities(ref.scenario, ref.final_state);

  std::vector<ConvergenceRow> rows;
  for (int lvl = nstar_min; lvl <= nstar_max; ++lvl) {
    const size_t j = 1 + static_cast<size_t>(nstar_max - lvl);
    ConvergenceRow row;
    row.nstar = lvl;
    row.nodes_per_region = nodes_for_level(lvl);
    const Mesh coarse = build_three_layer_mesh(cfg.model.breakpoints, row.nodes_per_region);
    row.h = std::max({coarse.spacing(Region::HTL), coarse.spacing(Region::Intrinsic), coarse.spacing(Region::ETL)});
    row.eoc.fill(std::nan(""));
    row.error.fill(std::nan(""));
    if (!jobs[j].result) {
      row.message = jobs[j].error;
      rows.push_back(row);
      continue;
    }
    const SimulationResult& r = *jobs[j].result;
    row.mass_drift = mass_drift(r.records);
    const Densities d = compute_densities(r.scenario, r.final_state);
    for (size_t fi = 0; fi < kAllFields.size(); ++fi) {
      const Field f = kAllFields[fi];
      const auto fine = field_values(ref.scenario, ref.final_state, dref, f);
      const auto proj = intrinsic_field(f) ? project_intrinsic_to_coarser(ref.scenario.mesh, coarse, fine)
                                           : project_to_coarser(ref.scenario.mesh, coarse, fine);
      const auto mine = field_values(r.scenario, r.final_state, d, f);
      double s = 0.0;
      for (size_t i = 0; i < mine.size(); ++i) {
        const int cell = intrinsic_field(f) ? coarse.intrinsic_cells[i] : static_cast<int>(i);
        const double e = mine[i] - proj[i];
        s += coarse.cells[cell].measure * e * e;
      }
      row.error[fi] = std::sqrt(s);
    }
    row.ok = true;
    rows.push_back(row);
  }
  for (size_t i = 0; i + 1 < rows.size(); ++i) {
    if (!rows[i].ok || !rows[i + 1].ok) continue;
    for (size_t fi = 0; fi < kAllFields.size(); ++fi)
      rows[i + 1].eoc[fi] =
          std::log(rows[i].error[fi] / rows[i + 1].error[fi]) / std::log(rows[i].h / rows[i + 1].h);
  }
  return rows;
}

int cmd_run(const std::filesystem::path& config, const GlobalOptions& g) {
  return guarded(g, [&] {
    const RunConfig cfg = load_config(config);
    const auto dir = output_dir(cfg, g);
    const double time_scale = cfg.model.physical ? cfg.model.physical->time_scale() : 0.0;
    const double length_scale = cfg.model.physical ? cfg.model.physical->l : 0.0;

    ManifestInfo man{"run", config.string(), cfg.text, {}, "ok"};
    SimulationResult res;
    int code = kExitOk;
    try {
      res = simulate(cfg, cfg.model.nodes_per_region, cfg.output.steady, cfg.output.profile_times);
    } catch (const ConfigError&) {
      throw;
    } catch (const MassOutOfRange&) {
      throw;
    } catch (const std::runtime_error& e) {
      if (!dynamic_cast<const NoConvergence*>(&e) && !dynamic_cast<const StepFailure*>(&e)) throw;
      std::cerr << "solver error: " << e.what() << "\n";
      man.status = std::string("failed: ") + e.what();
      code = kExitSolver;
    }

    std::filesystem::create_directories(dir);
    if (code == kExitOk) {
      diagnostics_table(res.records, time_scale).write(dir / "diagnostics.csv");
      man.files.push_back("diagnostics.csv");
      for (const State& s : res.snapshots) {
        const std::string name = "profiles_" + time_label(time_scale > 0 ? s.time * time_scale : s.time) + ".csv";
        profile_table(res.scenario, s, length_scale).write(dir / name);
        man.files.push_back(name);
      }
      if (res.steady) {
        profile_table(res.scenario, *res.steady, length_scale).write(dir / "steady.csv");
        man.files.push_back("steady.csv");
      }
      if (cfg.output.svg) {
        std::vector<double> t;
        for (const auto& r : res.records) t.push_back(time_scale > 0 ? r.time * time_scale : r.time);
        Series se{"E_T", t, {}}, sd{"D_T", t, {}}, si{"E_inf", t, {}};
        for (const auto& r : res.records) {
          se.y.push_back(r.entropy_E_T);
          sd.y.push_back(r.dissipation_D_T);
          si.y.push_back(r.entropy_vs_steady_E_inf);
        }
        std::vector<Series> es{se, sd};
        if (res.steady) es.push_back(si);
        const std::string xl = time_scale > 0 ? "t [s]" : "t";
        write_text(dir / "entropy.svg", svg_log_plot("entropy and dissipation", xl, es));
        man.files.push_back("entropy.svg");
        if (res.steady) {
          std::vector<Series> ls;
          for (size_t fi = 0; fi < kAllFields.size(); ++fi) {
            Series s{field_name(kAllFields[fi]), t, {}};
            for (const auto& r : res.records) s.y.push_back(r.l2_errors[fi]);
            ls.push_back(std::move(s));
          }
          write_text(dir / "l2.svg", svg_log_plot("squared L2 distance to the steady state", xl, ls));
          man.files.push_back("l2.svg");
        }
      }
      log(g, "run: " + std::to_string(res.records.size()) + " records written to " + dir.string());
    }
    write_text(dir / "manifest.json", manifest_json(man));
    return code;
  });
}

int cmd_convergence(const std::filesystem::path& config, int nstar_min, int nstar_max, int nstar_ref,
                    const GlobalOptions& g) {
  return guarded(g, [&] {
    const RunConfig cfg = load_config(config);
    const auto dir = output_dir(cfg, g);
    const auto rows = convergence_study(cfg, nstar_min, nstar_max, nstar_ref, g.threads);
    std::filesystem::create_directories(dir);
    CsvTable t;
    t.header = {"nstar", "nodes_per_region", "h", "status"};
    for (Field f : kAllFields) t.header.push_back("err_" + field_name(f));
    for (Field f : kAllFields) t.header.push_back("eoc_" + field_name(f));
    bool all_ok = true;
    for (const auto& r : rows) {
      std::vector<std::string> row{std::to_string(r.nstar), std::to_string(r.nodes_per_region), format_double(r.h),
                                   r.ok ? "ok" : "failed: " + r.message};
      for (double e : r.error) row.push_back(r.ok ? format_double(e) : "");
      for (double e : r.eoc) row.push_back(std::isnan(e) ? "" : format_double(e));
      t.rows.push_back(std::move(row));
      all_ok = all_ok && r.ok;
      if (!g.quiet) {
        std::fprintf(stderr, "n*=%d h=%.4g", r.nstar, r.h);
        for (size_t fi = 0; fi < 4; ++fi) std::fprintf(stderr, " %s=%.3e(%.2f)", field_name(kAllFields[fi]).c_str(),
                                                       r.error[fi], r.eoc[fi]);
        std::fprintf(stderr, "\n");
      }
    }
    t.write(dir / "convergence.csv");
    ManifestInfo man{"convergence", config.string(), cfg.text, {"convergence.csv"}, all_ok ? "ok" : "partial"};
    write_text(dir / "manifest.json", manifest_json(man));
    return all_ok ? kExitOk : kExitSolver;
  });
}

int cmd_equilibrium(const std::filesystem::path& config, const GlobalOptions& g) {
  return guarded(g, [&] {
    const RunConfig cfg = load_config(config);
    const auto dir = output_dir(cfg, g);
    const Scenario sc = instantiate(cfg.model);
    sc.validate();
    double target = 0.0;
    if (cfg.equilibrium_mass) {
      target = *cfg.equilibrium_mass;
    } else {
      if (!equilibrium_data(sc)) throw ConfigError("equilibrium needs constant Dirichlet data and zero generation");
      target = anion_mass(sc, initial_state(sc, cfg.initial, cfg.newton));
    }
    const State eq = solve_equilibrium(sc, target, cfg.newton);
    const double D = discrete_dissipation(sc, eq);
    const double length_scale = cfg.model.physical ? cfg.model.physical->l : 0.0;
    std::filesystem::create_directories(dir);
    profile_table(sc, eq, length_scale).write(dir / "equilibrium.csv");
    CsvTable s;
    s.header = {"anion_mass", "anion_mass_target", "dissipation_D_T", "entropy_E_T", "phi_a", "dissipation_ok"};
    const bool ok = D <= 1e-12;
    s.rows.push_back({format_double(anion_mass(sc, eq)), format_double(target), format_double(D),
                      format_double(discrete_entropy(sc, eq)),
                      format_double(eq.phi_a.empty() ? std::nan("") : eq.phi_a.front()), ok ? "true" : "false"});
    s.write(dir / "equilibrium_summary.csv");
    ManifestInfo man{"equilibrium", config.string(), cfg.text, {"equilibrium.csv", "equilibrium_summary.csv"},
                     ok ? "ok" : "dissipation above 1e-12"};
    write_text(dir / "manifest.json", manifest_json(man));
    log(g, "equilibrium: dissipation " + format_double(D) + (ok ? " (ok)" : " (above 1e-12)"));
    return ok ? kExitOk : kExitSolver;
  });
}

int cmd_steady(const std::filesystem::path& config, const GlobalOptions& g) {
  return guarded(g, [&] {
    const RunConfig cfg = load_config(config);
    const auto dir = output_dir(cfg, g);
    const Scenario sc = instantiate(cfg.model);
    sc.validate();
    const State init = initial_state(sc, cfg.initial, cfg.newton);
    NewtonReport rep;
    const State st = solve_steady_state(sc, init, 1e-2, cfg.newton, &rep);
    const double length_scale = cfg.model.physical ? cfg.model.physical->l : 0.0;
    std::filesystem::create_directories(dir);
    profile_table(sc, st, length_scale).write(dir / "steady.csv");
    CsvTable s;
    s.header = {"anion_mass", "residual", "newton_iterations", "dissipation_D_T", "entropy_E_T"};
    s.rows.push_back({format_double(anion_mass(sc, st)), format_double(rep.residual_norm),
                      std::to_string(rep.iterations), format_double(discrete_dissipation(sc, st)),
                      format_double(discrete_entropy(sc, st))});
    s.write(dir / "steady_summary.csv");
    ManifestInfo man{"steady", config.string(), cfg.text, {"steady.csv", "steady_summary.csv"}, "ok"};
    write_text(dir / "manifest.json", manifest_json(man));
    log(g, "steady: residual " + format_double(rep.residual_norm));
    return kExitOk;
  });
}

}  // namespace psim
