#include "psim/diagnostics.hpp"

#include <cmath>
#include <limits>

#include "psim/errors.hpp"
#include "psim/flux.hpp"

namespace psim {

std::string field_name(Field f) {
  switch (f) {
    case Field::Psi: return "psi";
    case Field::PhiN: return "phi_n";
    case Field::PhiP: return "phi_p";
    case Field::PhiA: return "phi_a";
    case Field::N: return "n_n";
    case Field::P: return "n_p";
    case Field::A: return "n_a";
  }
  return "unknown";
}

namespace {

void check_shape(const Scenario& sc, const State& st) {
  const size_t nc = sc.mesh.cells.size();
  if (st.psi.size() != nc || st.phi_n.size() != nc || st.phi_p.size() != nc ||
      st.phi_a.size() != sc.mesh.intrinsic_cells.size())
    throw MeshMismatch("state does not match the scenario mesh");
}

double face_dpsi_sq(const Scenario& sc, const Face& f, const std::vector<double>& u, double uD_left, double uD_right) {
  if (f.kind == FaceKind::Interior) {
    const double d = u[f.cell_l] - u[f.cell_k];
    return d * d;
  }
  if (f.kind == FaceKind::DirichletBoundary) {
    const double d = (f.dirichlet_slot == 0 ? uD_left : uD_right) - u[f.cell_k];
    return d * d;
  }
  (void)sc;
  return 0.0;
}

}  // namespace

double discrete_entropy(const Scenario& sc, const State& st) {
  check_shape(sc, st);
  const Mesh& mesh = sc.mesh;
  const auto& P = sc.params;
  // psi - psi^D, with psi^D linear and exactly zero at the contacts
  std::vector<double> w(mesh.num_cells());
  for (int k = 0; k < mesh.num_cells(); ++k) w[k] = st.psi[k] - sc.psiD_at(mesh.cells[k].center);
  double electric = 0.0;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    electric += sc.face_factor(f, &RegionCoefficients::eps) * f.transmissibility * face_dpsi_sq(sc, f, w, 0.0, 0.0);
  }
  double total = 0.5 * P.lambda * P.lambda * electric;
  const Densities d = compute_densities(sc, st);
  for (int k : mesh.intrinsic_cells) {
    const double Na = sc.coeff(k).N_a;
    total += mesh.cells[k].measure * Na * sc.stat_a.phi(d.a[mesh.intrinsic_index[k]] / Na);
  }
  double carriers = 0.0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = sc.coeff(k);
    const double x = mesh.cells[k].center;
    const double phiD = sc.phiD_at(x), psiD = sc.psiD_at(x);
    const double nD = dirichlet_density_n(sc, k, phiD, psiD);
    const double pD = dirichlet_density_p(sc, k, phiD, psiD);
    carriers += mesh.cells[k].measure * (c.N_n * relative_entropy_h(sc.stat_n, d.n[k] / c.N_n, nD / c.N_n) +
                                         c.N_p * relative_entropy_h(sc.stat_p, d.p[k] / c.N_p, pD / c.N_p));
  }
  return total + P.delta * carriers;
}

double discrete_dissipation(const Scenario& sc, const State& st) {
  check_shape(sc, st);
  const Mesh& mesh = sc.mesh;
  const auto& P = sc.params;
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = P.z_a;
  const Densities d = compute_densities(sc, st);

  double anions = 0.0, carriers = 0.0;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const int k = f.cell_k;
    const double tn = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_n);
    const double tp = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_p);
    double nL, pL, phinL, phipL;
    if (f.kind == FaceKind::Interior) {
      const int l = f.cell_l;
      nL = d.n[l];
      pL = d.p[l];
      phinL = st.phi_n[l];
      phipL = st.phi_p[l];
      if (f.in_intrinsic_interior) {
        const int ik = mesh.intrinsic_index[k], il = mesh.intrinsic_index[l];
        const double ta = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_a);
        const double abar = interface_density_regular({za, ta, d.a[ik], d.a[il], st.phi_a[ik], st.phi_a[il]}, sc.stat_a);
        const double dphi = st.phi_a[il] - st.phi_a[ik];
        anions += ta * abar * dphi * dphi;
      }
    } else {
      const double phiD = sc.phiD_face(f.dirichlet_slot), psiD = sc.psiD_face(f.dirichlet_slot);
      nL = dirichlet_density_n(sc, k, phiD, psiD);
      pL = dirichlet_density_p(sc, k, phiD, psiD);
      phinL = phipL = phiD;
    }
    const double nbar = interface_density_regular({zn, tn, d.n[k], nL, st.phi_n[k], phinL}, sc.stat_n);
    const double pbar = interface_density_regular({zp, tp, d.p[k], pL, st.phi_p[k], phipL}, sc.stat_p);
    const double dn = phinL - st.phi_n[k], dp = phipL - st.phi_p[k];
    carriers += tn * nbar * dn * dn + tp * pbar * dp * dp;
  }
  double recomb = 0.0;
  if (sc.recombination.enabled) {
    for (int k = 0; k < mesh.num_cells(); ++k) {
      if (!sc.recombination_regions[static_cast<int>(mesh.cells[k].region)]) continue;
      const double R = recombination_rate(sc.recombination, d.n[k], d.p[k], st.phi_n[k], st.phi_p[k]);
      recomb += mesh.cells[k].measure * R * (st.phi_p[k] - st.phi_n[k]);
    }
  }
  return 0.5 * za * za * anions + P.delta / (2.0 * P.nu) * carriers + P.delta / P.nu * recomb;
}

double free_energy_h(const Statistics& stat, double kT, double N, double zE, double x, double y) {
  // -zE x is linear, so its Bregman bracket is the difference of identical terms
  const double linear = -zE * ((x - y) - (x - y));
  return kT * N * relative_entropy_h(stat, x / N, y / N) + linear;
}

double entropy_vs_steady(const Scenario& sc, const State& st, const State& steady, bool dimensional) {
  check_shape(sc, st);
  check_shape(sc, steady);
  const Mesh& mesh = sc.mesh;
  std::vector<double> w(mesh.num_cells());
  for (int k = 0; k < mesh.num_cells(); ++k) w[k] = st.psi[k] - steady.psi[k];
  const Densities d = compute_densities(sc, st);
  const Densities dinf = compute_densities(sc, steady);

  if (!dimensional) {
    const auto& P = sc.params;
    double electric = 0.0;
    for (const Face& f : mesh.faces) {
      if (f.kind == FaceKind::NeumannBoundary) continue;
      electric += sc.face_factor(f, &RegionCoefficients::eps) * f.transmissibility * face_dpsi_sq(sc, f, w, 0.0, 0.0);
    }
    double anions = 0.0, carriers = 0.0;
    for (int k : mesh.intrinsic_cells) {
      const int ia = mesh.intrinsic_index[k];
      const double Na = sc.coeff(k).N_a;
      anions += mesh.cells[k].measure * Na * relative_entropy_h(sc.stat_a, d.a[ia] / Na, dinf.a[ia] / Na);
    }
    for (int k = 0; k < mesh.num_cells(); ++k) {
      const auto& c = sc.coeff(k);
      carriers += mesh.cells[k].measure * (c.N_n * relative_entropy_h(sc.stat_n, d.n[k] / c.N_n, dinf.n[k] / c.N_n) +
                                           c.N_p * relative_entropy_h(sc.stat_p, d.p[k] / c.N_p, dinf.p[k] / c.N_p));
    }
    return 0.5 * P.lambda * P.lambda * electric + anions + P.delta * carriers;
  }

  if (!sc.physical) throw ConfigError("dimensional free energy needs physical parameters");
  const PhysicalParams& ph = *sc.physical;
  const double UT = ph.thermal_voltage();
  const double kT = constants::k_B * ph.T;
  const double l = ph.l;
  double electric = 0.0;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const double eps = ph.eps_s * sc.face_factor(f, &RegionCoefficients::eps);
    electric += eps * (f.transmissibility / l) * UT * UT * face_dpsi_sq(sc, f, w, 0.0, 0.0);
  }
  double chem = 0.0;
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = ph.z_a;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& L = ph.layers[static_cast<int>(mesh.cells[k].region)];
    const double vol = mesh.cells[k].measure * l;
    chem += vol * free_energy_h(sc.stat_n, kT, L.N_n, zn * L.E_n * constants::q, ph.N_tilde * d.n[k], ph.N_tilde * dinf.n[k]);
    chem += vol * free_energy_h(sc.stat_p, kT, L.N_p, zp * L.E_p * constants::q, ph.N_tilde * d.p[k], ph.N_tilde * dinf.p[k]);
    const int ia = mesh.intrinsic_index[k];
    if (ia >= 0)
      chem += vol * free_energy_h(sc.stat_a, kT, L.N_a, za * L.E_a * constants::q, ph.N_a_tilde * d.a[ia],
                                  ph.N_a_tilde * dinf.a[ia]);
  }
  return 0.5 * electric + chem;
}

double l2_error_sq(const Scenario& sc, const State& st, const State& steady, Field f) {
  check_shape(sc, st);
  check_shape(sc, steady);
  const Mesh& mesh = sc.mesh;
  auto sum_all = [&](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (int k = 0; k < mesh.num_cells(); ++k) s += mesh.cells[k].measure * (u[k] - v[k]) * (u[k] - v[k]);
    return s;
  };
  auto sum_intr = [&](const std::vector<double>& u, const std::vector<double>& v) {
    double s = 0.0;
    for (int k : mesh.intrinsic_cells) {
      const int i = mesh.intrinsic_index[k];
      s += mesh.cells[k].measure * (u[i] - v[i]) * (u[i] - v[i]);
    }
    return s;
  };
  switch (f) {
    case Field::Psi: return sum_all(st.psi, steady.psi);
    case Field::PhiN: return sum_all(st.phi_n, steady.phi_n);
    case Field::PhiP: return sum_all(st.phi_p, steady.phi_p);
    case Field::PhiA: return sum_intr(st.phi_a, steady.phi_a);
    default: break;
  }
  const Densities a = compute_densities(sc, st), b = compute_densities(sc, steady);
  if (f == Field::N) return sum_all(a.n, b.n);
  if (f == Field::P) return sum_all(a.p, b.p);
  return sum_intr(a.a, b.a);
}

DiagnosticsRecord make_record(const Scenario& sc, const State& st, const State* steady) {
  DiagnosticsRecord r;
  r.time = st.time;
  r.entropy_E_T = discrete_entropy(sc, st);
  r.dissipation_D_T = discrete_dissipation(sc, st);
  r.anion_mass = anion_mass(sc, st);
  if (steady) {
    r.entropy_vs_steady_E_inf = entropy_vs_steady(sc, st, *steady, false);
    for (size_t i = 0; i < kAllFields.size(); ++i) r.l2_errors[i] = l2_error_sq(sc, st, *steady, kAllFields[i]);
    if (sc.physical) r.free_energy_dimensional = entropy_vs_steady(sc, st, *steady, true);
  } else {
    r.entropy_vs_steady_E_inf = std::numeric_limits<double>::quiet_NaN();
    r.l2_errors.fill(std::numeric_limits<double>::quiet_NaN());
  }
  return r;
}

DecayFit fit_exponential_decay(const std::vector<double>& t, const std::vector<double>& v, double lo_frac,
                               double hi_frac) {
  DecayFit fit;
  if (t.size() != v.size() || v.empty()) return fit;
  size_t ipeak = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[ipeak]) ipeak = i;
  const double peak = v[ipeak];
  if (!(peak > 0.0)) return fit;
  std::vector<double> xs, ys;
  for (size_t i = ipeak; i < v.size(); ++i) {
    if (v[i] >= lo_frac * peak && v[i] <= hi_frac * peak) {
      xs.push_back(t[i]);
      ys.push_back(std::log(v[i]));
    }
  }
  fit.points = static_cast<int>(xs.size());
  if (xs.size() < 3) return fit;
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) return fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.ok = true;
  return fit;
}

}  // namespace psim
