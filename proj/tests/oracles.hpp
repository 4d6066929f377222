#pragma once

#include <cmath>
#include <limits>

#include <boost/math/quadrature/exp_sinh.hpp>

namespace psim::testing {

// (2/sqrt(pi)) int_0^inf sqrt(x) / (exp(x - eta) + 1) dx, exp-sinh quadrature in long double
inline double fd_half_oracle(double eta) {
  boost::math::quadrature::exp_sinh<long double> integrator;
  const long double e = eta;
  auto f = [e](long double x) -> long double {
    const long double t = x - e;
    if (t > 0) {
      const long double w = std::exp(-t);
      return std::sqrt(x) * w / (1.0L + w);
    }
    return std::sqrt(x) / (std::exp(t) + 1.0L);
  };
  const long double v = integrator.integrate(f, 0.0L, std::numeric_limits<long double>::infinity());
  return static_cast<double>(2.0L * v / std::sqrt(3.14159265358979323846264338327950288L));
}

inline long double bernoulli_ld(long double x) {
  if (x == 0.0L) return 1.0L;
  return x / std::expm1(x);
}

// classical Scharfetter-Gummel flux with Boltzmann densities
inline double sg_flux(int z, double tau, double psiK, double psiL, double nK, double nL) {
  const long double d = static_cast<long double>(z) * (psiL - psiK);
  return static_cast<double>(-z * tau * (bernoulli_ld(-d) * nL - bernoulli_ld(d) * nK));
}

}  // namespace psim::testing
