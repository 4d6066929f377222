#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "psim/errors.hpp"
#include "psim/flux.hpp"
#include "psim/mesh.hpp"
#include "psim/system.hpp"
#include "oracles.hpp"

using namespace psim;

using psim::testing::bernoulli_ld;
using psim::testing::sg_flux;

TEST_CASE("flux: Bernoulli values") {
  CHECK(bernoulli(0.0) == 1.0);
  CHECK(bernoulli(1.0) == doctest::Approx(1.0 / (std::exp(1.0) - 1.0)).epsilon(1e-15));
  CHECK(bernoulli(-1.0) == doctest::Approx(bernoulli(1.0) + 1.0).epsilon(1e-15));
  CHECK(std::abs(bernoulli(1.0) - 0.581977) <= 1e-6);
  CHECK(bernoulli(800.0) >= 0.0);
  CHECK(bernoulli(800.0) < 1e-300);
}

TEST_CASE("flux: Bernoulli relative accuracy") {
  for (int i = 0; i <= 4000; ++i) {
    const double x = std::clamp(-700.0 + 0.35 * i + 1e-7 * (i % 7), -700.0, 700.0);
    const long double ref = bernoulli_ld(x);
    CAPTURE(x);
    REQUIRE(std::abs(bernoulli(x) - ref) <= 1e-14L * ref);
  }
  for (double x : {1e-12, 1e-8, 5e-5, 9.99e-5, 1e-4, 1.01e-4, 1e-3}) {
    for (double s : {1.0, -1.0}) {
      const long double ref = bernoulli_ld(s * x);
      CHECK(std::abs(bernoulli(s * x) - ref) <= 1e-14L * ref);
    }
  }
}

TEST_CASE("flux: Bernoulli reflection identity and monotonicity") {
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = 1e-12 * std::pow(500.0 / 1e-12, i / 9999.0);
    worst = std::max(worst, std::abs(bernoulli(-x) - bernoulli(x) - x) / (1.0 + x));
  }
  CHECK(worst <= 1e-14);
  double prev = bernoulli(-750.0);
  for (int i = 1; i <= 150000; ++i) {
    const double x = -750.0 + 0.01 * i;
    const double b = bernoulli(x);
    REQUIRE(b <= prev);
    prev = b;
  }
}

TEST_CASE("flux: Bernoulli derivative and divided differences") {
  for (double x : {-30.0, -2.0, -0.3, -0.005, 0.0, 0.004, 0.2, 1.0, 15.0}) {
    const double h = 1e-5;
    CHECK(bernoulli_deriv(x) == doctest::Approx((bernoulli(x + h) - bernoulli(x - h)) / (2 * h)).epsilon(1e-8));
  }
  CHECK(bernoulli_divided_difference(0.3, 0.3) == doctest::Approx(bernoulli_deriv(0.3)));
  CHECK(bernoulli_divided_difference(2.0, -1.0) == doctest::Approx((bernoulli(2.0) - bernoulli(-1.0)) / 3.0));
  CHECK(bernoulli_divided_difference(0.5, 0.4) == doctest::Approx((bernoulli(0.5) - bernoulli(0.4)) / 0.1).epsilon(1e-10));
}

TEST_CASE("flux: Q and Sedan flux examples") {
  const Statistics b(StatisticsKind::Boltzmann);
  FaceFluxInputs in;
  in.z = 1;
  in.tau = 2.0;
  in.n_K = in.n_L = 0.7;
  in.phi_K = in.phi_L = 0.3;
  CHECK(q_value(in, b) == 0.0);
  CHECK(sedan_flux(in, b) == 0.0);

  in.phi_K = 0.0;
  in.phi_L = 1.0;
  in.n_K = 1.0;
  in.n_L = std::exp(1.0);
  CHECK(std::abs(q_value(in, b)) <= 1e-15);

  // equal quasi Fermi potentials carry no current
  in.phi_K = in.phi_L = 0.2;
  in.n_K = 0.3;
  in.n_L = 4.0;
  CHECK(std::abs(sedan_flux(in, b)) <= 1e-15);

  // Boltzmann identity Q = z (psi_L - psi_K) on random states
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const int z = i % 2 ? 1 : -1;
    const double psiK = u(rng), psiL = u(rng), phiK = u(rng), phiL = u(rng);
    FaceFluxInputs f{z, 1.0, std::exp(z * (phiK - psiK)), std::exp(z * (phiL - psiL)), phiK, phiL};
    REQUIRE(std::abs(q_value(f, b) - z * (psiL - psiK)) <= 1e-14 * (1.0 + std::abs(psiL - psiK)) * 8);
  }
}

TEST_CASE("flux: Sedan reduces to Scharfetter-Gummel under Boltzmann statistics") {
  const Statistics b(StatisticsKind::Boltzmann);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-10.0, 10.0), t(0.1, 10.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int z = i % 3 == 0 ? -1 : 1;
    const double psiK = u(rng), psiL = psiK + 0.5 * u(rng), phiK = 0.3 * u(rng), phiL = phiK + 0.3 * u(rng);
    const double tau = t(rng);
    const double nK = std::exp(z * (phiK - psiK)), nL = std::exp(z * (phiL - psiL));
    const double J = sedan_flux({z, tau, nK, nL, phiK, phiL}, b);
    const double ref = sg_flux(z, tau, psiK, psiL, nK, nL);
    const double scale = tau * (bernoulli(-z * (psiL - psiK)) * nL + bernoulli(z * (psiL - psiK)) * nK);
    worst = std::max(worst, std::abs(J - ref) / scale);
  }
  CHECK(worst <= 1e-13);
}

TEST_CASE("flux: interface density is a convex combination") {
  const StatisticsKind kinds[] = {StatisticsKind::Boltzmann, StatisticsKind::FermiDiracHalf,
                                  StatisticsKind::FermiDiracMinusOne};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0), e(-13.0, 1.0);
  for (auto kind : kinds) {
    const Statistics s(kind);
    const bool bounded = kind == StatisticsKind::FermiDiracMinusOne;
    for (int i = 0; i < 10000; ++i) {
      const int z = bounded ? 1 : (i % 2 ? 1 : -1);
      const double etaK = 8.0 * u(rng), etaL = 8.0 * u(rng);
      const double phiK = 2.0 * u(rng);
      // |D phi| from 1e-13 up to 10, both signs
      const double dphi = (u(rng) < 0 ? -1.0 : 1.0) * std::pow(10.0, e(rng));
      const double nK = s.eval(etaK), nL = s.eval(etaL);
      const FaceFluxInputs in{z, 1.0, nK, nL, phiK, phiK + dphi};
      const double nbar = interface_density_regular(in, s);
      CAPTURE(to_string(kind));
      CAPTURE(dphi);
      REQUIRE(nbar >= std::min(nK, nL) - 1e-14);
      REQUIRE(nbar <= std::max(nK, nL) + 1e-14);
      // away from the limit branch the two forms agree with the defining quotient
      if (std::abs(dphi) > 1e-3) {
        const double Q = q_value(in, s);
        const double quotient = (bernoulli(-Q) * nL - bernoulli(Q) * nK) / (z * dphi);
        REQUIRE(std::abs(nbar - quotient) <= 1e-9 * std::max(nK, nL));
        REQUIRE(interface_density(in, s) == nbar);
      }
      // flux-dissipation consistency: J D phi = -tau z^2 nbar (D phi)^2 <= 0
      REQUIRE(sedan_flux(in, s) * dphi <= 1e-300);
    }
  }
  const Statistics b(StatisticsKind::Boltzmann);
  CHECK(interface_density_regular({1, 1.0, 0.4, 0.4, 0.0, 1e-14}, b) == doctest::Approx(0.4));
  CHECK(interface_density({1, 1.0, 1.0, 1.0, 0.0, 1.0}, b) == doctest::Approx(1.0));
  CHECK_THROWS_AS(interface_density({1, 1.0, 1.0, 2.0, 0.5, 0.5}, b), DegenerateFace);
}

TEST_CASE("flux: antisymmetry of Q and J") {
  const Statistics s(StatisticsKind::FermiDiracHalf);
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 1000; ++i) {
    const FaceFluxInputs a{i % 2 ? 1 : -1, 1.7, s.eval(u(rng)), s.eval(u(rng)), u(rng), u(rng)};
    const FaceFluxInputs b{a.z, a.tau, a.n_L, a.n_K, a.phi_L, a.phi_K};
    REQUIRE(q_value(a, s) + q_value(b, s) == 0.0);
    REQUIRE(sedan_flux(a, s) + sedan_flux(b, s) == 0.0);
  }
}

TEST_CASE("flux: assembled fluxes are conservative") {
  const Mesh mesh = build_three_layer_mesh({0, 2, 4, 6}, 9);
  Scenario sc = make_basic_scenario(mesh);
  sc.dirichlet = {0.5, 0.5, 0.6, 0.6};
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  State st;
  const int nc = mesh.num_cells();
  for (int k = 0; k < nc; ++k) {
    st.psi.push_back(u(rng));
    st.phi_n.push_back(u(rng));
    st.phi_p.push_back(u(rng));
  }
  for (int i = 0; i < mesh.num_intrinsic(); ++i) st.phi_a.push_back(u(rng));

  const FaceFluxes J = face_fluxes(sc, st);
  // stationary residual rows: sum over cells telescopes to the boundary fluxes
  AssemblyRequest req;
  req.mode = AssemblyMode::Stationary;
  req.with_jacobian = false;
  req.anion_mass_target = anion_mass(sc, st);
  const ResidualSystem rs = assemble_residual(sc, st, req);
  const Layout lay = make_layout(mesh);
  double sum_n = 0.0, sum_p = 0.0, scale = 0.0;
  for (int k = 0; k < nc; ++k) {
    sum_n += rs.residual[lay.phi_n(k)];
    sum_p += rs.residual[lay.phi_p(k)];
  }
  double bnd_n = 0.0, bnd_p = 0.0;
  for (const Face& f : mesh.faces) {
    scale = std::max({scale, std::abs(J.J_n[f.index]), std::abs(J.J_p[f.index])});
    if (f.kind == FaceKind::DirichletBoundary) {
      bnd_n += J.J_n[f.index];
      bnd_p += J.J_p[f.index];
    }
    if (!f.in_intrinsic_interior) CHECK(J.J_a[f.index] == 0.0);
  }
  CHECK(std::abs(sum_n - bnd_n) <= 1e-13 * nc * scale);
  CHECK(std::abs(sum_p - bnd_p) <= 1e-13 * nc * scale);

  // each interior face flux and its mirror cancel exactly
  const Statistics b(StatisticsKind::Boltzmann);
  for (const Face& f : mesh.faces) {
    if (f.kind != FaceKind::Interior) continue;
    const int k = f.cell_k, l = f.cell_l;
    const double nk = density_n(sc, k, st.phi_n[k], st.psi[k]), nl = density_n(sc, l, st.phi_n[l], st.psi[l]);
    const FaceFluxInputs kl{-1, f.transmissibility, nk, nl, st.phi_n[k], st.phi_n[l]};
    const FaceFluxInputs lk{-1, f.transmissibility, nl, nk, st.phi_n[l], st.phi_n[k]};
    REQUIRE(sedan_flux(kl, b) + sedan_flux(lk, b) == 0.0);
  }
}
