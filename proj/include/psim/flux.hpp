#pragma once

#include "psim/statistics.hpp"

namespace psim {

/// B(x) = x / (exp(x) - 1), B(0) = 1.
double bernoulli(double x);
double bernoulli_deriv(double x);
/// (B(x) - B(y)) / (x - y), with the derivative as limit when x == y.
double bernoulli_divided_difference(double x, double y);

/// Two-point data for one face as seen from cell K.  On Dirichlet faces the
/// L values are the boundary traces.  Potentials carry any band-edge shift
/// already through the densities, which come from the state equation.
struct FaceFluxInputs {
  int z = 1;
  double tau = 1.0;
  double n_K = 1.0;
  double n_L = 1.0;
  double phi_K = 0.0;
  double phi_L = 0.0;
};

/// Q = D(z phi - log n)
double q_value(const FaceFluxInputs& in, const Statistics& stat);

/// J_{K,sigma} = -z tau (B(-Q) n_L - B(Q) n_K)
double sedan_flux(const FaceFluxInputs& in, const Statistics& stat);

/// Same flux from a precomputed Q.
inline double sedan_flux_q(int z, double tau, double Q, double n_K, double n_L) {
  return -z * tau * (bernoulli(-Q) * n_L - bernoulli(Q) * n_K);
}

/// n_bar with J = -tau z^2 n_bar D phi.  Throws DegenerateFace when |z D phi| < 1e-12.
double interface_density(const FaceFluxInputs& in, const Statistics& stat);

/// interface_density with the convex-combination limit on degenerate faces.
double interface_density_regular(const FaceFluxInputs& in, const Statistics& stat);

}  // namespace psim
