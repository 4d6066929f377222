#include "psim/flux.hpp"

#include <algorithm>
#include <cmath>

#include "psim/errors.hpp"

namespace psim {

namespace {
constexpr double kDegenerate = 1e-12;
}

double bernoulli(double x) {
  const double ax = std::abs(x);
  if (ax < 1e-4) {
    const double x2 = x * x;
    return 1.0 - 0.5 * x + x2 / 12.0 - x2 * x2 / 720.0;
  }
  // one rounding, so the subnormal tail stays monotone
  if (x > 700.0) return std::exp(std::log(x) - x);
  return x / std::expm1(x);
}

double bernoulli_deriv(double x) {
  if (std::abs(x) < 1e-2) {
    const double x2 = x * x;
    return -0.5 + x / 6.0 - x * x2 / 180.0 + x * x2 * x2 / 5040.0;
  }
  const double b = bernoulli(x);
  return b * (1.0 - b) / x - b;
}

double bernoulli_divided_difference(double x, double y) {
  const double h = x - y;
  if (std::abs(h) >= 1.0) return (bernoulli(x) - bernoulli(y)) / h;
  // mean of B' over [y, x] by 5-point Gauss-Legendre
  static const double nodes[5] = {0.0, 0.5384693101056831, -0.5384693101056831, 0.9061798459386640,
                                  -0.9061798459386640};
  static const double weights[5] = {0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                    0.2369268850561891, 0.2369268850561891};
  const double mid = 0.5 * (x + y);
  double s = 0.0;
  for (int i = 0; i < 5; ++i) s += weights[i] * bernoulli_deriv(mid + 0.5 * h * nodes[i]);
  return 0.5 * s;
}

double q_value(const FaceFluxInputs& in, const Statistics&) {
  return (in.z * in.phi_L - std::log(in.n_L)) - (in.z * in.phi_K - std::log(in.n_K));
}

double sedan_flux(const FaceFluxInputs& in, const Statistics& stat) {
  return sedan_flux_q(in.z, in.tau, q_value(in, stat), in.n_K, in.n_L);
}

double interface_density(const FaceFluxInputs& in, const Statistics& stat) {
  const double zdphi = in.z * (in.phi_L - in.phi_K);
  if (std::abs(zdphi) < kDegenerate) throw DegenerateFace("interface density on a face with D phi ~ 0");
  return interface_density_regular(in, stat);
}

double interface_density_regular(const FaceFluxInputs& in, const Statistics& stat) {
  // (B(-Q) n_L - B(Q) n_K) / (z D phi) written as the convex combination
  // -B[x,y] n_L + (1 + B[x,y]) n_K with x = D log n, y = -Q, x - y = z D phi
  const double x = std::log(in.n_L) - std::log(in.n_K);
  const double y = -q_value(in, stat);
  const double w = std::clamp(-bernoulli_divided_difference(x, y), 0.0, 1.0);
  return w * in.n_L + (1.0 - w) * in.n_K;
}

}  // namespace psim
