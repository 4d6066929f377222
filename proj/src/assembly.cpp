#include <cmath>

#include "psim/errors.hpp"
#include "psim/flux.hpp"
#include "psim/system.hpp"

namespace psim {

double Scenario::phiD_at(double x) const {
  const double w = (x - mesh.breakpoints[0]) / mesh.length();
  return (1.0 - w) * dirichlet.phi_left + w * dirichlet.phi_right;
}

double Scenario::psiD_at(double x) const {
  const double w = (x - mesh.breakpoints[0]) / mesh.length();
  return (1.0 - w) * dirichlet.psi_left + w * dirichlet.psi_right;
}

double Scenario::face_factor(const Face& f, double RegionCoefficients::*member) const {
  const double ck = coeff(f.cell_k).*member;
  if (f.cell_l < 0) return ck;
  const double cl = coeff(f.cell_l).*member;
  if (ck == cl) return ck;
  return f.distance / (f.dist_k / ck + f.dist_l / cl);
}

double Scenario::intrinsic_capacity() const {
  double cap = 0.0;
  for (int k : mesh.intrinsic_cells) cap += mesh.cells[k].measure * coeff(k).N_a;
  return cap;
}

void Scenario::validate() const {
  params.validate();
  recombination.validate();
  const size_t nc = mesh.cells.size();
  if (doping.size() != nc || generation.size() != nc)
    throw ConfigError("doping and generation must have one value per cell");
  for (double g : generation)
    if (!(g >= 0.0)) throw ConfigError("generation must be non-negative");
  if (stat_n.kind() == StatisticsKind::FermiDiracMinusOne || stat_p.kind() == StatisticsKind::FermiDiracMinusOne)
    throw ConfigError("electrons and holes need Boltzmann or Fermi-Dirac 1/2 statistics");
  if (stat_a.kind() != StatisticsKind::FermiDiracMinusOne)
    throw ConfigError("anion vacancies need Fermi-Dirac -1 statistics");
}

Scenario make_basic_scenario(const Mesh& mesh) {
  Scenario sc;
  sc.mesh = mesh;
  sc.doping.assign(mesh.num_cells(), 0.0);
  sc.generation.assign(mesh.num_cells(), 0.0);
  return sc;
}

namespace {

struct CarrierAt {
  double n = 0.0;
  double n_eta = 0.0;     // dn/deta
  double logn = 0.0;
  double logn_eta = 0.0;  // dlog n/deta
};

CarrierAt carrier_at(const Statistics& stat, double N, double eta) {
  CarrierAt c;
  switch (stat.kind()) {
    case StatisticsKind::Boltzmann: {
      const double f = std::exp(eta);
      c.n = N * f;
      c.n_eta = N * f;
      c.logn = std::log(N) + eta;
      c.logn_eta = 1.0;
      break;
    }
    case StatisticsKind::FermiDiracHalf: {
      const double f = stat.eval(eta);
      const double df = stat.deriv(eta);
      c.n = N * f;
      c.n_eta = N * df;
      c.logn = std::log(N) + stat.log_eval(eta);
      c.logn_eta = df / f;
      break;
    }
    case StatisticsKind::FermiDiracMinusOne: {
      c.n = N * stat.eval(eta);
      c.n_eta = N * stat.deriv(eta);
      c.logn = std::log(N) + stat.log_eval(eta);
      c.logn_eta = stat.log_deriv(eta);
      break;
    }
  }
  return c;
}

CarrierAt carrier_n(const Scenario& sc, int k, double phi, double psi) {
  const auto& c = sc.coeff(k);
  const int z = DimensionlessParams::z_n;
  return carrier_at(sc.stat_n, c.N_n, z * (phi - psi) + z * c.E_n);
}

CarrierAt carrier_p(const Scenario& sc, int k, double phi, double psi) {
  const auto& c = sc.coeff(k);
  const int z = DimensionlessParams::z_p;
  return carrier_at(sc.stat_p, c.N_p, z * (phi - psi) + z * c.E_p);
}

CarrierAt carrier_a(const Scenario& sc, int k, double phi, double psi) {
  const auto& c = sc.coeff(k);
  const int z = sc.params.z_a;
  return carrier_at(sc.stat_a, c.N_a, z * (phi - psi) + z * c.E_a);
}

struct FluxEval {
  double J = 0.0;
  double dK_phi = 0.0, dK_psi = 0.0, dL_phi = 0.0, dL_psi = 0.0;
};

FluxEval flux_eval(int z, double tau, const CarrierAt& K, double phiK, const CarrierAt& L, double phiL) {
  FluxEval e;
  const double Q = z * (phiL - phiK) - (L.logn - K.logn);
  const double bm = bernoulli(-Q), bp = bernoulli(Q);
  e.J = -z * tau * (bm * L.n - bp * K.n);
  const double dJdQ = z * tau * (bernoulli_deriv(-Q) * L.n + bernoulli_deriv(Q) * K.n);
  const double dJdnL = -z * tau * bm;
  const double dJdnK = z * tau * bp;
  e.dK_phi = dJdQ * (-z + z * K.logn_eta) + dJdnK * z * K.n_eta;
  e.dK_psi = dJdQ * (-z * K.logn_eta) - dJdnK * z * K.n_eta;
  e.dL_phi = dJdQ * (z - z * L.logn_eta) + dJdnL * z * L.n_eta;
  e.dL_psi = dJdQ * (z * L.logn_eta) - dJdnL * z * L.n_eta;
  return e;
}

struct Assembler {
  const Scenario& sc;
  const Layout& lay;
  bool with_jac;
  int skip_row = -1;
  Eigen::VectorXd F;
  std::vector<Eigen::Triplet<double>> trip;

  void add(int row, double v) { F[row] += v; }
  void jac(int row, int col, double v) {
    if (with_jac && row != skip_row && v != 0.0) trip.emplace_back(row, col, v);
  }
};

}  // namespace

double density_n(const Scenario& sc, int cell, double phi, double psi) { return carrier_n(sc, cell, phi, psi).n; }
double density_p(const Scenario& sc, int cell, double phi, double psi) { return carrier_p(sc, cell, phi, psi).n; }
double density_a(const Scenario& sc, int cell, double phi, double psi) { return carrier_a(sc, cell, phi, psi).n; }
double dirichlet_density_n(const Scenario& sc, int cell, double phiD, double psiD) {
  return density_n(sc, cell, phiD, psiD);
}
double dirichlet_density_p(const Scenario& sc, int cell, double phiD, double psiD) {
  return density_p(sc, cell, phiD, psiD);
}

Densities compute_densities(const Scenario& sc, const State& st) {
  Densities d;
  const int nc = sc.mesh.num_cells();
  d.n.resize(nc);
  d.p.resize(nc);
  d.a.resize(sc.mesh.num_intrinsic());
  for (int k = 0; k < nc; ++k) {
    d.n[k] = density_n(sc, k, st.phi_n[k], st.psi[k]);
    d.p[k] = density_p(sc, k, st.phi_p[k], st.psi[k]);
    const int ia = sc.mesh.intrinsic_index[k];
    if (ia >= 0) d.a[ia] = density_a(sc, k, st.phi_a[ia], st.psi[k]);
  }
  return d;
}

Layout make_layout(const Mesh& mesh) {
  Layout lay;
  lay.offset.resize(mesh.num_cells());
  int pos = 0;
  for (int k = 0; k < mesh.num_cells(); ++k) {
    lay.offset[k] = pos;
    pos += mesh.intrinsic_index[k] >= 0 ? 4 : 3;
  }
  lay.size = pos;
  return lay;
}

Eigen::VectorXd pack(const Scenario& sc, const Layout& lay, const State& st) {
  Eigen::VectorXd x(lay.size);
  for (int k = 0; k < sc.mesh.num_cells(); ++k) {
    x[lay.phi_n(k)] = st.phi_n[k];
    x[lay.phi_p(k)] = st.phi_p[k];
    const int ia = sc.mesh.intrinsic_index[k];
    if (ia >= 0) x[lay.phi_a(k)] = st.phi_a[ia];
    x[lay.psi(k, sc.mesh)] = st.psi[k];
  }
  return x;
}

void unpack(const Scenario& sc, const Layout& lay, const Eigen::VectorXd& x, State& st) {
  const int nc = sc.mesh.num_cells();
  st.phi_n.resize(nc);
  st.phi_p.resize(nc);
  st.psi.resize(nc);
  st.phi_a.resize(sc.mesh.num_intrinsic());
  for (int k = 0; k < nc; ++k) {
    st.phi_n[k] = x[lay.phi_n(k)];
    st.phi_p[k] = x[lay.phi_p(k)];
    const int ia = sc.mesh.intrinsic_index[k];
    if (ia >= 0) st.phi_a[ia] = x[lay.phi_a(k)];
    st.psi[k] = x[lay.psi(k, sc.mesh)];
  }
}

ResidualSystem assemble_residual(const Scenario& sc, const State& st, const AssemblyRequest& req) {
  const Mesh& mesh = sc.mesh;
  const Layout lay = make_layout(mesh);
  const int nc = mesh.num_cells();
  const auto& P = sc.params;
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = P.z_a;
  const double lam2 = P.lambda * P.lambda;
  const bool transient = req.mode == AssemblyMode::Transient;
  if (transient && (req.old_state == nullptr || !(req.tau > 0.0)))
    throw std::invalid_argument("transient assembly needs an old state and tau > 0");

  Assembler A{sc, lay, req.with_jacobian, -1, Eigen::VectorXd::Zero(lay.size), {}};
  if (req.with_jacobian) A.trip.reserve(static_cast<size_t>(lay.size) * 12);

  const bool mass_row = !transient && mesh.num_intrinsic() > 0;
  const int last_intr = mesh.num_intrinsic() > 0 ? mesh.intrinsic_cells.back() : -1;
  if (mass_row) A.skip_row = lay.phi_a(last_intr);

  std::vector<CarrierAt> cn(nc), cp(nc), ca(nc);
  for (int k = 0; k < nc; ++k) {
    cn[k] = carrier_n(sc, k, st.phi_n[k], st.psi[k]);
    cp[k] = carrier_p(sc, k, st.phi_p[k], st.psi[k]);
    const int ia = mesh.intrinsic_index[k];
    if (ia >= 0) ca[k] = carrier_a(sc, k, st.phi_a[ia], st.psi[k]);
  }

  Densities old;
  if (transient) old = compute_densities(sc, *req.old_state);

  // cell terms
  for (int k = 0; k < nc; ++k) {
    const Cell& c = mesh.cells[k];
    const double m = c.measure;
    const int rn = lay.phi_n(k), rp = lay.phi_p(k), rpsi = lay.psi(k, mesh);
    const int ia = mesh.intrinsic_index[k];

    if (transient) {
      const double s = P.nu * m / req.tau;
      A.add(rn, s * zn * (cn[k].n - old.n[k]));
      A.jac(rn, rn, s * zn * zn * cn[k].n_eta);
      A.jac(rn, rpsi, -s * zn * zn * cn[k].n_eta);
      A.add(rp, s * zp * (cp[k].n - old.p[k]));
      A.jac(rp, rp, s * zp * zp * cp[k].n_eta);
      A.jac(rp, rpsi, -s * zp * zp * cp[k].n_eta);
      if (ia >= 0) {
        const int ra = lay.phi_a(k);
        const double sa = m / req.tau;
        A.add(ra, sa * za * (ca[k].n - old.a[ia]));
        A.jac(ra, ra, sa * za * za * ca[k].n_eta);
        A.jac(ra, rpsi, -sa * za * za * ca[k].n_eta);
      }
    }

    // generation and recombination: -z m (gamma G - R)
    const double gen = P.gamma * sc.generation[k];
    A.add(rn, -zn * m * gen);
    A.add(rp, -zp * m * gen);
    if (sc.recombination.enabled && sc.recombination_regions[static_cast<int>(c.region)]) {
      const auto R = recombination_with_derivatives(sc.recombination, cn[k].n, cp[k].n, st.phi_n[k], st.phi_p[k]);
      const double dphin = R.dR_dnn * zn * cn[k].n_eta + R.dR_dphin;
      const double dphip = R.dR_dnp * zp * cp[k].n_eta + R.dR_dphip;
      const double dpsi = -R.dR_dnn * zn * cn[k].n_eta - R.dR_dnp * zp * cp[k].n_eta;
      A.add(rn, zn * m * R.R);
      A.jac(rn, rn, zn * m * dphin);
      A.jac(rn, rp, zn * m * dphip);
      A.jac(rn, rpsi, zn * m * dpsi);
      A.add(rp, zp * m * R.R);
      A.jac(rp, rn, zp * m * dphin);
      A.jac(rp, rp, zp * m * dphip);
      A.jac(rp, rpsi, zp * m * dpsi);
    }

    // Poisson right-hand side
    const double delta = P.delta;
    A.add(rpsi, -delta * m * (zn * cn[k].n + zp * cp[k].n + sc.doping[k]));
    A.jac(rpsi, rn, -delta * m * zn * zn * cn[k].n_eta);
    A.jac(rpsi, rpsi, delta * m * zn * zn * cn[k].n_eta);
    A.jac(rpsi, rp, -delta * m * zp * zp * cp[k].n_eta);
    A.jac(rpsi, rpsi, delta * m * zp * zp * cp[k].n_eta);
    if (ia >= 0) {
      const int ra = lay.phi_a(k);
      A.add(rpsi, -m * za * ca[k].n);
      A.jac(rpsi, ra, -m * za * za * ca[k].n_eta);
      A.jac(rpsi, rpsi, m * za * za * ca[k].n_eta);
    }
  }

  // face terms
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const int k = f.cell_k;
    const int rnK = lay.phi_n(k), rpK = lay.phi_p(k), rpsiK = lay.psi(k, mesh);
    const double eps_f = sc.face_factor(f, &RegionCoefficients::eps);
    const double tn = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_n);
    const double tp = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_p);
    const double tpsi = lam2 * eps_f * f.transmissibility;

    if (f.kind == FaceKind::Interior) {
      const int l = f.cell_l;
      const int rnL = lay.phi_n(l), rpL = lay.phi_p(l), rpsiL = lay.psi(l, mesh);

      const double dpsi = st.psi[l] - st.psi[k];
      A.add(rpsiK, -tpsi * dpsi);
      A.add(rpsiL, tpsi * dpsi);
      A.jac(rpsiK, rpsiK, tpsi);
      A.jac(rpsiK, rpsiL, -tpsi);
      A.jac(rpsiL, rpsiL, tpsi);
      A.jac(rpsiL, rpsiK, -tpsi);

      const auto jn = flux_eval(zn, tn, cn[k], st.phi_n[k], cn[l], st.phi_n[l]);
      A.add(rnK, jn.J);
      A.add(rnL, -jn.J);
      A.jac(rnK, rnK, jn.dK_phi);
      A.jac(rnK, rpsiK, jn.dK_psi);
      A.jac(rnK, rnL, jn.dL_phi);
      A.jac(rnK, rpsiL, jn.dL_psi);
      A.jac(rnL, rnK, -jn.dK_phi);
      A.jac(rnL, rpsiK, -jn.dK_psi);
      A.jac(rnL, rnL, -jn.dL_phi);
      A.jac(rnL, rpsiL, -jn.dL_psi);

      const auto jp = flux_eval(zp, tp, cp[k], st.phi_p[k], cp[l], st.phi_p[l]);
      A.add(rpK, jp.J);
      A.add(rpL, -jp.J);
      A.jac(rpK, rpK, jp.dK_phi);
      A.jac(rpK, rpsiK, jp.dK_psi);
      A.jac(rpK, rpL, jp.dL_phi);
      A.jac(rpK, rpsiL, jp.dL_psi);
      A.jac(rpL, rpK, -jp.dK_phi);
      A.jac(rpL, rpsiK, -jp.dK_psi);
      A.jac(rpL, rpL, -jp.dL_phi);
      A.jac(rpL, rpsiL, -jp.dL_psi);

      if (f.in_intrinsic_interior) {
        const int iaK = mesh.intrinsic_index[k], iaL = mesh.intrinsic_index[l];
        const int raK = lay.phi_a(k), raL = lay.phi_a(l);
        const double ta = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_a);
        const auto ja = flux_eval(za, ta, ca[k], st.phi_a[iaK], ca[l], st.phi_a[iaL]);
        A.add(raK, ja.J);
        A.add(raL, -ja.J);
        A.jac(raK, raK, ja.dK_phi);
        A.jac(raK, rpsiK, ja.dK_psi);
        A.jac(raK, raL, ja.dL_phi);
        A.jac(raK, rpsiL, ja.dL_psi);
        A.jac(raL, raK, -ja.dK_phi);
        A.jac(raL, rpsiK, -ja.dK_psi);
        A.jac(raL, raL, -ja.dL_phi);
        A.jac(raL, rpsiL, -ja.dL_psi);
      }
    } else {  // Dirichlet contact
      const double psiD = sc.psiD_face(f.dirichlet_slot);
      const double phiD = sc.phiD_face(f.dirichlet_slot);
      A.add(rpsiK, -tpsi * (psiD - st.psi[k]));
      A.jac(rpsiK, rpsiK, tpsi);

      const CarrierAt nD = carrier_n(sc, k, phiD, psiD);
      const auto jn = flux_eval(zn, tn, cn[k], st.phi_n[k], nD, phiD);
      A.add(rnK, jn.J);
      A.jac(rnK, rnK, jn.dK_phi);
      A.jac(rnK, rpsiK, jn.dK_psi);

      const CarrierAt pD = carrier_p(sc, k, phiD, psiD);
      const auto jp = flux_eval(zp, tp, cp[k], st.phi_p[k], pD, phiD);
      A.add(rpK, jp.J);
      A.jac(rpK, rpK, jp.dK_phi);
      A.jac(rpK, rpsiK, jp.dK_psi);
    }
  }

  if (mass_row) {
    // the anion rows sum to zero without time terms; one is traded for the mass constraint
    const int row = lay.phi_a(last_intr);
    double mass = 0.0;
    for (int k : mesh.intrinsic_cells) {
      const double m = mesh.cells[k].measure;
      mass += m * ca[k].n;
      if (req.with_jacobian) {
        A.trip.emplace_back(row, lay.phi_a(k), m * za * ca[k].n_eta);
        A.trip.emplace_back(row, lay.psi(k, mesh), -m * za * ca[k].n_eta);
      }
    }
    A.F[row] = mass - req.anion_mass_target;
  }

  ResidualSystem out;
  out.residual = std::move(A.F);
  if (req.with_jacobian) {
    out.jacobian.resize(lay.size, lay.size);
    out.jacobian.setFromTriplets(A.trip.begin(), A.trip.end());
  }
  return out;
}

FaceFluxes face_fluxes(const Scenario& sc, const State& st) {
  const Mesh& mesh = sc.mesh;
  FaceFluxes out;
  const size_t nf = mesh.faces.size();
  out.J_n.assign(nf, 0.0);
  out.J_p.assign(nf, 0.0);
  out.J_a.assign(nf, 0.0);
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = sc.params.z_a;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const int k = f.cell_k;
    const double tn = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_n);
    const double tp = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_p);
    const auto nK = carrier_n(sc, k, st.phi_n[k], st.psi[k]);
    const auto pK = carrier_p(sc, k, st.phi_p[k], st.psi[k]);
    if (f.kind == FaceKind::Interior) {
      const int l = f.cell_l;
      out.J_n[f.index] = flux_eval(zn, tn, nK, st.phi_n[k], carrier_n(sc, l, st.phi_n[l], st.psi[l]), st.phi_n[l]).J;
      out.J_p[f.index] = flux_eval(zp, tp, pK, st.phi_p[k], carrier_p(sc, l, st.phi_p[l], st.psi[l]), st.phi_p[l]).J;
      if (f.in_intrinsic_interior) {
        const int iaK = mesh.intrinsic_index[k], iaL = mesh.intrinsic_index[l];
        const double ta = f.transmissibility * sc.face_factor(f, &RegionCoefficients::mu_a);
        out.J_a[f.index] = flux_eval(za, ta, carrier_a(sc, k, st.phi_a[iaK], st.psi[k]), st.phi_a[iaK],
                                     carrier_a(sc, l, st.phi_a[iaL], st.psi[l]), st.phi_a[iaL]).J;
      }
    } else {
      const double psiD = sc.psiD_face(f.dirichlet_slot), phiD = sc.phiD_face(f.dirichlet_slot);
      out.J_n[f.index] = flux_eval(zn, tn, nK, st.phi_n[k], carrier_n(sc, k, phiD, psiD), phiD).J;
      out.J_p[f.index] = flux_eval(zp, tp, pK, st.phi_p[k], carrier_p(sc, k, phiD, psiD), phiD).J;
    }
  }
  return out;
}

double anion_mass(const Scenario& sc, const State& st) {
  double mass = 0.0;
  for (int k : sc.mesh.intrinsic_cells) {
    const int ia = sc.mesh.intrinsic_index[k];
    mass += sc.mesh.cells[k].measure * density_a(sc, k, st.phi_a[ia], st.psi[k]);
  }
  return mass;
}

}  // namespace psim
