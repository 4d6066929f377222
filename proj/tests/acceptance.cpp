// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "psim/commands.hpp"
#include "psim/errors.hpp"
#include "psim/flux.hpp"
#include "support.hpp"

using namespace psim;
using namespace psim::testing;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "[x] ") + what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

int failures = 0;

void report(int id, const char* title, const Verdict& v) {
  if (!v.pass) ++failures;
  std::printf("%s  %d. %s | %s\n", v.pass ? "PASS" : "FAIL", id, title, v.detail.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Timed {
  SimulationResult result;
  double seconds = 0.0;
};

Timed timed_simulate(const RunConfig& cfg, int nodes) {
  const auto t0 = std::chrono::steady_clock::now();
  Timed t{simulate(cfg, nodes, true), 0.0};
  t.seconds = seconds_since(t0);
  return t;
}

std::vector<double> column(const std::vector<DiagnosticsRecord>& rs, double DiagnosticsRecord::*m) {
  std::vector<double> out;
  for (const auto& r : rs) out.push_back(r.*m);
  return out;
}

// -------- criterion 1

void entropy_monotone(Verdict& v, const std::string& tag, const Timed& run, double budget) {
  const auto E = column(run.result.records, &DiagnosticsRecord::entropy_E_T);
  double worst = -1e300;
  for (size_t m = 1; m < E.size(); ++m) worst = std::max(worst, (E[m] - E[m - 1]) / (1.0 + E[m - 1]));
  v.require(worst <= 1e-10, tag + fmt(" max (E^m-E^{m-1})/(1+E^{m-1}) = %.2e", worst));
  v.require(E[1] < E[0] && E.back() < E.front(), tag + fmt(" decreases %.6g -> %.6g", E.front(), E.back()));
  const size_t n = std::min<size_t>(100, E.size());
  const auto [lo, hi] = std::minmax_element(E.end() - n, E.end());
  const double spread = (*hi - *lo) / std::abs(*hi);
  v.require(spread < 1e-12, tag + fmt(" last 100 steps vary %.2e rel", spread));
  v.require(run.seconds < budget, tag + fmt(" %.1f s (< %.0f s)", run.seconds, budget));
}

// -------- criterion 2

void decay(Verdict& v, const std::string& tag, const Timed& run) {
  const auto& rs = run.result.records;
  const auto t = column(rs, &DiagnosticsRecord::time);
  std::vector<std::pair<std::string, std::vector<double>>> series;
  series.emplace_back("E_inf", column(rs, &DiagnosticsRecord::entropy_vs_steady_E_inf));
  for (size_t i = 0; i < kAllFields.size(); ++i) {
    std::vector<double> s;
    for (const auto& r : rs) s.push_back(r.l2_errors[i]);
    series.emplace_back("l2_" + field_name(kAllFields[i]), s);
  }
  double worst_r2 = 1.0, worst_slope = -1e300, worst_floor = 0.0;
  std::string worst_r2_name, worst_floor_name;
  for (const auto& [name, y] : series) {
    const DecayFit fit = fit_exponential_decay(t, y);
    const double peak = *std::max_element(y.begin(), y.end());
    const double floor = *std::min_element(y.begin(), y.end()) / peak;
    if (!fit.ok) {
      v.require(false, tag + " " + name + " has no fit window");
      continue;
    }
    if (fit.r2 < worst_r2) {
      worst_r2 = fit.r2;
      worst_r2_name = name;
    }
    worst_slope = std::max(worst_slope, fit.slope);
    if (floor > worst_floor) {
      worst_floor = floor;
      worst_floor_name = name;
    }
  }
  v.require(worst_r2 >= 0.99, tag + fmt(" min R^2 %.5f", worst_r2) + " (" + worst_r2_name + ")");
  v.require(worst_slope < 0.0, tag + fmt(" max slope %.4f", worst_slope));
  v.require(worst_floor <= 1e-24, tag + fmt(" worst min/peak %.2e", worst_floor) + " (" + worst_floor_name + ")");
}

// -------- criterion 5

Verdict flux_suite(const Scenario& assembled, const State& st) {
  Verdict v;
  v.require(bernoulli(0.0) == 1.0, "B(0) = 1");

  double refl = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 1e-12 * std::pow(500.0 / 1e-12, i / 9999.0);
    refl = std::max(refl, std::abs(bernoulli(-x) - bernoulli(x) - x) / (1.0 + x));
  }
  v.require(refl <= 1e-14, fmt("|B(-x)-B(x)-x|/(1+|x|) <= %.2e", refl));

  bool mono = true;
  double prev = bernoulli(-750.0);
  for (int i = 1; i <= 150000; ++i) {
    const double b = bernoulli(-750.0 + 0.01 * i);
    mono = mono && b <= prev;
    prev = b;
  }
  v.require(mono, "monotone on [-750, 750]");

  const Statistics boltz(StatisticsKind::Boltzmann);
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0), t(0.1, 10.0), e(-13.0, 1.0);
  double sg = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int z = i % 3 == 0 ? -1 : 1;
    const double psiK = 10 * u(rng), psiL = psiK + 5 * u(rng), phiK = 3 * u(rng), phiL = phiK + 3 * u(rng);
    const double tau = t(rng);
    const double nK = std::exp(z * (phiK - psiK)), nL = std::exp(z * (phiL - psiL));
    const double J = sedan_flux({z, tau, nK, nL, phiK, phiL}, boltz);
    const double ref = sg_flux(z, tau, psiK, psiL, nK, nL);
    const double d = z * (psiL - psiK);
    sg = std::max(sg, std::abs(J - ref) / (tau * (bernoulli(-d) * nL + bernoulli(d) * nK)));
  }
  v.require(sg <= 1e-13, fmt("Sedan vs SG %.2e rel", sg));

  double excess = -1e300;
  for (auto kind : {StatisticsKind::Boltzmann, StatisticsKind::FermiDiracHalf, StatisticsKind::FermiDiracMinusOne}) {
    const Statistics s(kind);
    for (int i = 0; i < 10000; ++i) {
      const int z = kind == StatisticsKind::FermiDiracMinusOne ? 1 : (i % 2 ? 1 : -1);
      const double nK = s.eval(8 * u(rng)), nL = s.eval(8 * u(rng));
      const double phiK = 2 * u(rng);
      const double dphi = (u(rng) < 0 ? -1.0 : 1.0) * std::pow(10.0, e(rng));
      const double nbar = interface_density_regular({z, 1.0, nK, nL, phiK, phiK + dphi}, s);
      excess = std::max({excess, std::min(nK, nL) - nbar, nbar - std::max(nK, nL)});
    }
  }
  v.require(excess <= 1e-14, fmt("n_bar outside [min,max] by <= %.2e", std::max(excess, 0.0)));

  // each interior face, evaluated from both sides
  const FaceFluxes J = face_fluxes(assembled, st);
  const Densities d = compute_densities(assembled, st);
  bool exact = true;
  double agree = 0.0;
  for (const Face& f : assembled.mesh.faces) {
    if (f.kind != FaceKind::Interior) continue;
    const int k = f.cell_k, l = f.cell_l;
    const double tn = f.transmissibility * assembled.face_factor(f, &RegionCoefficients::mu_n);
    const FaceFluxInputs kl{-1, tn, d.n[k], d.n[l], st.phi_n[k], st.phi_n[l]};
    const FaceFluxInputs lk{-1, tn, d.n[l], d.n[k], st.phi_n[l], st.phi_n[k]};
    const double a = sedan_flux(kl, assembled.stat_n), b = sedan_flux(lk, assembled.stat_n);
    exact = exact && a + b == 0.0;
    const double Q = q_value(kl, assembled.stat_n);
    const double size = tn * (bernoulli(-Q) * d.n[l] + bernoulli(Q) * d.n[k]);
    agree = std::max(agree, std::abs(a - J.J_n[f.index]) / size);
    if (f.in_intrinsic_interior) {
      const int ik = assembled.mesh.intrinsic_index[k], il = assembled.mesh.intrinsic_index[l];
      const double ta = f.transmissibility * assembled.face_factor(f, &RegionCoefficients::mu_a);
      const double x = sedan_flux({1, ta, d.a[ik], d.a[il], st.phi_a[ik], st.phi_a[il]}, assembled.stat_a);
      const double y = sedan_flux({1, ta, d.a[il], d.a[ik], st.phi_a[il], st.phi_a[ik]}, assembled.stat_a);
      exact = exact && x + y == 0.0;
    }
  }
  v.require(exact, "J_K + J_L == 0 on every interior face");
  v.require(agree <= 1e-12, fmt("assembled flux matches the face formula to %.1e of its terms", agree));
  return v;
}

// -------- criterion 6

Verdict statistics_suite() {
  Verdict v;
  bool chain = true;
  for (auto kind : {StatisticsKind::Boltzmann, StatisticsKind::FermiDiracHalf, StatisticsKind::FermiDiracMinusOne}) {
    const Statistics s(kind);
    for (int i = 0; i <= 800; ++i) {
      const double eta = -40.0 + 0.1 * i;
      const double f = s.eval(eta), d = s.deriv(eta);
      chain = chain && d > 0.0 && d <= f * (1.0 + 1e-14) && f <= std::exp(eta) * (1.0 + 1e-14);
    }
  }
  v.require(chain, "0 < F' <= F <= exp on [-40, 40]");

  const double sp = std::sqrt(M_PI);
  const double c1 = 2.0 / (3.0 * sp), c2 = (2.0 / sp) * (2.0 / 3.0 + std::sqrt(2.0) * (1.0 + sp / 2.0));
  bool bound = true;
  for (int i = 0; i <= 490; ++i) {
    const double eta = 1.0 + 0.1 * i;
    const double fv = eval_fd_half(eta), p = std::pow(eta, 1.5);
    bound = bound && c1 * p <= fv && fv <= c2 * p;
  }
  v.require(bound, "c1 eta^1.5 <= F_1/2 <= c2 eta^1.5 on [1, 50]");

  const double f0 = eval_fd_half(0.0), oracle = fd_half_oracle(0.0);
  v.require(std::abs(f0 - 0.765147) <= 1e-6 && std::abs(f0 - oracle) <= 1e-6,
            fmt("F_1/2(0) = %.9f, quadrature %.9f", f0, oracle));

  for (auto kind : {StatisticsKind::Boltzmann, StatisticsKind::FermiDiracHalf, StatisticsKind::FermiDiracMinusOne}) {
    const Statistics s(kind);
    double worst = 0.0, at = 0.0;
    for (int i = 0; i <= 600; ++i) {
      const double eta = -30.0 + 0.1 * i;
      const double err = std::abs(s.inverse(s.eval(eta)) - eta);
      if (err > worst) {
        worst = err;
        at = eta;
      }
    }
    v.require(worst <= 1e-8, "roundtrip " + to_string(kind) + fmt(" %.2e at eta = %.1f", worst, at));
  }
  return v;
}

// -------- criterion 7

double jacobian_worst(const RunConfig& cfg, bool drop_generation, std::mt19937_64& rng) {
  Scenario sc = instantiate(cfg.model, 17);
  if (drop_generation) std::fill(sc.generation.begin(), sc.generation.end(), 0.0);
  InitialSpec spec = cfg.initial;
  spec.light_soak = 0.0;
  const State base = initial_state(sc, spec, cfg.newton);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const State old = perturbed(base, rng, 0.3);
    const State st = perturbed(base, rng, 0.3);
    AssemblyRequest tr;
    tr.old_state = &old;
    tr.tau = 0.1;
    AssemblyRequest sr;
    sr.mode = AssemblyMode::Stationary;
    sr.anion_mass_target = anion_mass(sc, old);
    worst = std::max({worst, jacobian_fd_error(sc, st, tr), jacobian_fd_error(sc, st, sr)});
  }
  return worst;
}

}  // namespace

int main() {
  const RunConfig cfg1a = shipped("test1a.toml");
  const RunConfig cfg1b = shipped("test1b.toml");
  const RunConfig psc = shipped("psc.toml");
  RunConfig smoke = cfg1a;
  smoke.time.t_end = 20.0;

  Timed full1a, smoke1a, full1b;
  try {
    full1a = timed_simulate(cfg1a, cfg1a.model.nodes_per_region);
    smoke1a = timed_simulate(smoke, 65);
    full1b = timed_simulate(cfg1b, cfg1b.model.nodes_per_region);
  } catch (const std::exception& e) {
    std::printf("FAIL  test runs aborted: %s\n", e.what());
    return 1;
  }

  {
    Verdict v;
    entropy_monotone(v, "1A", full1a, 120.0);
    entropy_monotone(v, "smoke", smoke1a, 5.0);
    report(1, "entropy monotone under equilibrium data", v);
  }
  {
    Verdict v;
    decay(v, "1A", full1a);
    decay(v, "1B", full1b);
    report(2, "exponential decay to the steady state", v);
  }

  std::vector<ConvergenceRow> rows;
  double ref_drift = 0.0;
  {
    Verdict v;
    const int threads = std::max(1u, std::thread::hardware_concurrency());
    const auto t0 = std::chrono::steady_clock::now();
    try {
      rows = convergence_study(cfg1b, 2, 8, 9, threads, &ref_drift);
    } catch (const std::exception& e) {
      v.require(false, std::string("study failed: ") + e.what());
    }
    const double secs = seconds_since(t0);
    for (const auto& r : rows) {
      if (r.nstar < 6) continue;
      std::string line = "n*=" + std::to_string(r.nstar) + " EOC";
      bool ok = r.ok;
      for (size_t fi = 0; fi < 4; ++fi) {
        line += " " + field_name(kAllFields[fi]) + fmt("=%.3f", r.eoc[fi]);
        ok = ok && r.eoc[fi] >= 1.8 && r.eoc[fi] <= 2.2;
      }
      v.require(ok, line);
    }
    v.require(rows.size() == 7, std::to_string(rows.size()) + " levels");
    v.require(secs < 600.0, fmt("%.1f s on %.0f threads", secs, threads));
    report(3, "second order spatial convergence", v);
  }
  {
    Verdict v;
    double worst = std::max({mass_drift(full1a.result.records), mass_drift(smoke1a.result.records),
                             mass_drift(full1b.result.records), ref_drift});
    for (const auto& r : rows) worst = std::max(worst, r.mass_drift);
    v.require(worst <= 1e-10, fmt("max relative drift %.2e over %.0f runs", worst, 4.0 + rows.size()));
    report(4, "anion mass conservation", v);
  }

  report(5, "flux scheme properties",
         flux_suite(full1b.result.scenario, full1b.result.snapshots.empty() ? full1b.result.initial
                                                                            : full1b.result.snapshots.front()));
  report(6, "statistics properties", statistics_suite());

  {
    Verdict v;
    std::mt19937_64 rng(202);
    try {
      v.require(jacobian_worst(cfg1a, false, rng) <= 1e-6, fmt("1A FD %.2e", jacobian_worst(cfg1a, false, rng)));
      v.require(jacobian_worst(cfg1b, false, rng) <= 1e-6, fmt("1B FD %.2e", jacobian_worst(cfg1b, false, rng)));
      // G is state independent; without it the round-off of the minority rows stays resolvable
      v.require(jacobian_worst(psc, true, rng) <= 1e-6, fmt("PSC FD %.2e", jacobian_worst(psc, true, rng)));

      const Scenario& sc = full1a.result.scenario;
      const State eq = solve_equilibrium(sc, anion_mass(sc, full1a.result.initial), cfg1a.newton);
      const State ss = solve_steady_state(sc, full1a.result.initial, cfg1a.time.step, cfg1a.newton);
      const double diff = sup_diff(eq, ss);
      v.require(diff <= 1e-10, fmt("|eq - steady|_inf = %.2e", diff));
      const double D = discrete_dissipation(sc, eq);
      v.require(D <= 1e-12, fmt("D(eq) = %.2e", D));
    } catch (const std::exception& e) {
      v.require(false, e.what());
    }
    report(7, "solver correctness", v);
  }

  {
    Verdict v;
    const PhysicalParams& ph = *psc.model.physical;
    const DimensionlessParams d = nondimensionalize(ph);
    const long double kB = 1.380649e-23L, q = 1.602176634e-19L;
    const long double UT = kB * ph.T / q;
    const long double l = ph.l;
    const double lambda = static_cast<double>(std::sqrt(ph.eps_s * UT / (l * l * q * ph.N_a_tilde)));
    const double gamma = static_cast<double>(ph.F_ph * ph.alpha_g * l * l / (ph.mu_tilde * UT * ph.N_tilde));
    v.require(d.nu == ph.mu_a_tilde / ph.mu_tilde && d.delta == ph.N_tilde / ph.N_a_tilde, "nu, delta exact");
    const double rel = std::max(std::abs(d.lambda - lambda) / lambda, std::abs(d.gamma - gamma) / gamma);
    v.require(rel <= 1e-12, fmt("lambda, gamma to %.1e", rel));

    try {
      const auto t0 = std::chrono::steady_clock::now();
      const SimulationResult run = simulate(psc, psc.model.nodes_per_region, true);
      const double secs = seconds_since(t0);
      std::vector<double> t, f;
      for (const auto& r : run.records) {
        t.push_back(r.time);
        f.push_back(r.free_energy_dimensional.value_or(std::nan("")));
      }
      const DecayFit fit = fit_exponential_decay(t, f);
      v.require(fit.ok && fit.r2 >= 0.98 && fit.slope < 0.0,
                fmt("free energy fit R^2 = %.4f, slope %.3g", fit.r2, fit.slope) + fmt(" over %.0f points, %.1f s", fit.points, secs));

      // band edges cancel inside H for the cells of the final state
      const Scenario& sc = run.scenario;
      const Densities dn = compute_densities(sc, run.final_state), dinf = compute_densities(sc, *run.steady);
      const double kT = constants::k_B * ph.T;
      double worst = 0.0;
      for (int k : sc.mesh.intrinsic_cells) {
        const auto& L = ph.layers[1];
        const int ia = sc.mesh.intrinsic_index[k];
        const double pairs[3][4] = {{L.N_n, -L.E_n, ph.N_tilde * dn.n[k], ph.N_tilde * dinf.n[k]},
                                    {L.N_p, L.E_p, ph.N_tilde * dn.p[k], ph.N_tilde * dinf.p[k]},
                                    {L.N_a, L.E_a, ph.N_a_tilde * dn.a[ia], ph.N_a_tilde * dinf.a[ia]}};
        const Statistics* stats[3] = {&sc.stat_n, &sc.stat_p, &sc.stat_a};
        for (int c = 0; c < 3; ++c) {
          const auto& [N, zE_eV, x, y] = pairs[c];
          const double with = free_energy_h(*stats[c], kT, N, zE_eV * constants::q, x, y);
          const double without = free_energy_h(*stats[c], kT, N, 0.0, x, y);
          if (without > 0.0) worst = std::max(worst, std::abs(with - without) / without);
        }
      }
      // the literal extended bracket agrees up to the round-off of its own terms
      std::mt19937_64 rng(303);
      std::uniform_real_distribution<double> ufrac(0.5, 1.5);
      double literal_worst = 0.0;
      for (int i = 0; i < 10000; ++i) {
        const Statistics& s = sc.stat_a;
        const double N = ph.layers[1].N_a, zE = ph.layers[1].E_a * constants::q;
        const double y = 0.2 * N, x = y * ufrac(rng);
        auto Phi = [&](double w) { return kT * N * s.phi(w / N) - zE * w; };
        auto dPhi = [&](double w) { return kT * s.inverse(w / N) - zE; };
        const double literal = Phi(x) - Phi(y) - dPhi(y) * (x - y);
        const double terms = std::abs(Phi(x)) + std::abs(Phi(y)) + std::abs(dPhi(y) * (x - y));
        literal_worst = std::max(literal_worst, std::abs(literal - free_energy_h(s, kT, N, 0.0, x, y)) / terms);
      }
      v.require(literal_worst <= 1e-12, fmt("literal bracket to %.1e of its terms", literal_worst));
      v.require(worst <= 1e-12, fmt("band-edge terms cancel to %.1e rel", worst));
    } catch (const std::exception& e) {
      v.require(false, std::string("PSC run failed: ") + e.what());
    }
    report(8, "PSC scenario properties", v);
  }

  std::printf("%d of 8 criteria failed\n", failures);
  return failures ? 1 : 0;
}
