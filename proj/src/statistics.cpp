#include "psim/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>

#include "psim/errors.hpp"

namespace psim {

namespace {

constexpr double kSeriesMax = -2.0;
// The Sommerfeld series is asymptotic only; its smallest term is about
// exp(-eta), so it reaches 1e-10 relative accuracy only well above eta = 20.
constexpr double kAsymptoticMin = 40.0;
constexpr double kExpClamp = 745.0;

// F_j(eta) / exp(eta) from the alternating series, valid for eta < 0.
double fd_series_scaled(double j, double eta) {
  const double x = std::exp(eta);
  double power = 1.0;
  double sum = 0.0;
  for (int k = 1; k < 400; ++k) {
    const double term = power / std::pow(static_cast<double>(k), j + 1.0);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-18 * std::abs(sum)) break;
    power *= x;
  }
  return sum;
}

double fd_asymptotic(double j, double eta) {
  const double lead = std::pow(eta, j + 1.0) / std::tgamma(j + 2.0);
  const double inv2 = 1.0 / (eta * eta);
  double coef = 1.0;
  double p = 1.0;
  double sum = 1.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= 40; ++k) {
    coef *= (j + 3.0 - 2.0 * k) * (j + 2.0 - 2.0 * k);
    p *= inv2;
    const double eta2k = 2.0 * (1.0 - std::pow(2.0, 1.0 - 2.0 * k)) * std::riemann_zeta(2.0 * k);
    const double term = eta2k * coef * p;
    if (std::abs(term) >= std::abs(prev)) break;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    prev = term;
  }
  // the cos(pi j) F_j(-eta) correction vanishes for half-integer j
  return lead * sum;
}

double fd_quadrature(double j, double eta) {
  using boost::math::quadrature::gauss;
  const double power = 2.0 * j + 1.0;
  // in t = sqrt(xi) the integrand is smooth; the Fermi step at t0 has width ~ 1/t0
  auto integrand = [eta, power](double t) {
    const double s = t * t - eta;
    const double occ = s > 0.0 ? std::exp(-s) / (1.0 + std::exp(-s)) : 1.0 / (std::exp(s) + 1.0);
    return 2.0 * std::pow(t, power) * occ;
  };
  const double t0 = std::sqrt(std::max(eta, 0.0));
  const double t_end = std::sqrt(std::max(eta, 0.0) + 60.0);
  const double width = std::min(0.5, 1.0 / (1.0 + t0));
  double total = 0.0;
  auto panels = [&](double a, double b) {
    const int n = std::max(1, static_cast<int>(std::ceil((b - a) / width)));
    const double h = (b - a) / n;
    for (int i = 0; i < n; ++i) total += gauss<double, 20>::integrate(integrand, a + i * h, a + (i + 1) * h);
  };
  if (t0 > 0.0) panels(0.0, t0);
  panels(t0, t_end);
  return total / std::tgamma(j + 1.0);
}

double fd_integral(double j, double eta) {
  if (eta <= kSeriesMax) return std::exp(eta) * fd_series_scaled(j, eta);
  if (eta >= kAsymptoticMin) return fd_asymptotic(j, eta);
  return fd_quadrature(j, eta);
}

double fd_log(double j, double eta) {
  if (eta <= kSeriesMax) return eta + std::log(fd_series_scaled(j, eta));
  return std::log(fd_integral(j, eta));
}

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Appendix-type lower bound constant for F_{1/2} on eta >= 1
const double kC1 = 2.0 / (3.0 * std::sqrt(M_PI));

double fd_half_inverse(double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("FermiDiracHalf inverse requires x > 0");
  const double logx = std::log(x);
  double lo = logx;
  double hi = std::max(1.0, std::pow(x / kC1, 2.0 / 3.0)) + 1.0;
  double eta = x < 1.0 ? logx : std::pow(0.75 * std::sqrt(M_PI) * x, 2.0 / 3.0);
  eta = std::clamp(eta, lo, hi);
  for (int it = 0; it < 200; ++it) {
    const double g = fd_log(0.5, eta) - logx;
    if (g == 0.0) return eta;
    if (g > 0.0)
      hi = eta;
    else
      lo = eta;
    const double slope = eval_fd_minus_half(eta) / eval_fd_half(eta);
    double next = eta - g / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const double step = std::abs(next - eta);
    eta = next;
    if (step <= 1e-15 * (1.0 + std::abs(eta)) || hi - lo <= 1e-15 * (1.0 + std::abs(eta))) break;
  }
  return eta;
}

}  // namespace

double eval_fd_half(double eta) { return fd_integral(0.5, eta); }
double eval_fd_minus_half(double eta) { return fd_integral(-0.5, eta); }
double eval_fd_three_halves(double eta) { return fd_integral(1.5, eta); }

StatisticsKind parse_statistics_kind(const std::string& name) {
  if (name == "boltzmann") return StatisticsKind::Boltzmann;
  if (name == "fermi_dirac_half") return StatisticsKind::FermiDiracHalf;
  if (name == "fermi_dirac_minus_one") return StatisticsKind::FermiDiracMinusOne;
  throw ConfigError("unknown statistics kind '" + name + "'");
}

std::string to_string(StatisticsKind kind) {
  switch (kind) {
    case StatisticsKind::Boltzmann: return "boltzmann";
    case StatisticsKind::FermiDiracHalf: return "fermi_dirac_half";
    case StatisticsKind::FermiDiracMinusOne: return "fermi_dirac_minus_one";
  }
  return "unknown";
}

double Statistics::eval(double eta) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann: return std::exp(eta);
    case StatisticsKind::FermiDiracHalf: return eval_fd_half(eta);
    case StatisticsKind::FermiDiracMinusOne: {
      const double e = std::clamp(eta, -kExpClamp, kExpClamp);
      if (e >= 0.0) return 1.0 / (1.0 + std::exp(-e));
      const double x = std::exp(e);
      return x / (1.0 + x);
    }
  }
  return 0.0;
}

double Statistics::deriv(double eta) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann: return std::exp(eta);
    case StatisticsKind::FermiDiracHalf: return eval_fd_minus_half(eta);
    case StatisticsKind::FermiDiracMinusOne: {
      const double x = std::exp(-std::abs(std::clamp(eta, -kExpClamp, kExpClamp)));
      return x / ((1.0 + x) * (1.0 + x));
    }
  }
  return 0.0;
}

double Statistics::inverse(double x) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann:
      if (!(x > 0.0)) throw DomainError("Boltzmann inverse requires x > 0");
      return std::log(x);
    case StatisticsKind::FermiDiracHalf: return fd_half_inverse(x);
    case StatisticsKind::FermiDiracMinusOne:
      if (!(x >= 1e-300) || !(1.0 - x >= 1e-300))
        throw DomainError("FermiDiracMinusOne inverse requires 0 < x < 1");
      return std::log(x) - std::log1p(-x);
  }
  return 0.0;
}

double Statistics::phi(double x) const {
  if (!(x >= 0.0)) throw DomainError("entropy requires x >= 0");
  switch (kind_) {
    case StatisticsKind::Boltzmann: return xlogx(x) - x + 1.0;
    case StatisticsKind::FermiDiracHalf: {
      if (x == 0.0) return eval_fd_three_halves(0.0);
      // Legendre transform of the primitive F_{3/2}, shifted so Phi(F(0)) = 0
      const double eta = fd_half_inverse(x);
      return eta * x - eval_fd_three_halves(eta) + eval_fd_three_halves(0.0);
    }
    case StatisticsKind::FermiDiracMinusOne:
      if (x > 1.0) throw DomainError("FermiDiracMinusOne entropy requires x <= 1");
      return xlogx(x) + xlogx(1.0 - x) + std::log(2.0);
  }
  return 0.0;
}

double Statistics::log_eval(double eta) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann: return eta;
    case StatisticsKind::FermiDiracHalf: return fd_log(0.5, eta);
    case StatisticsKind::FermiDiracMinusOne: {
      const double e = std::clamp(eta, -kExpClamp, kExpClamp);
      if (e >= 0.0) return -std::log1p(std::exp(-e));
      return e - std::log1p(std::exp(e));
    }
  }
  return 0.0;
}

double Statistics::log_deriv(double eta) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann: return 1.0;
    case StatisticsKind::FermiDiracHalf: return eval_fd_minus_half(eta) / eval_fd_half(eta);
    case StatisticsKind::FermiDiracMinusOne: return Statistics(kind_).eval(-eta);
  }
  return 0.0;
}

double Statistics::primitive(double eta) const {
  switch (kind_) {
    case StatisticsKind::Boltzmann: return std::exp(eta);
    case StatisticsKind::FermiDiracHalf: return eval_fd_three_halves(eta);
    case StatisticsKind::FermiDiracMinusOne:
      if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
      return std::log1p(std::exp(eta));
  }
  return 0.0;
}

Statistics make_statistics(StatisticsKind kind) { return Statistics(kind); }

namespace {

// (1 + u) log(1 + u) - u without cancellation near u = 0
double xlogx_bregman_unit(double u) {
  if (std::abs(u) < 0.1) {
    double power = u * u;
    double sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      const double term = power / (k * (k - 1.0));
      sum += (k % 2 == 0) ? term : -term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      power *= u;
    }
    return sum;
  }
  return (1.0 + u) * std::log1p(u) - u;
}

// x log(x / y) - x + y
double xlogx_bregman(double x, double y) {
  if (x == 0.0) return y;
  if (y == 0.0) return std::numeric_limits<double>::infinity();
  const double u = (x - y) / y;
  if (std::abs(u) < 0.1) return y * xlogx_bregman_unit(u);
  // far apart: no cancellation, and the ratio may overflow or round to zero
  return x * (std::log(x) - std::log(y)) - x + y;
}

}  // namespace

double relative_entropy_h(const Statistics& stat, double x, double y) {
  if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("relative entropy requires non-negative arguments");
  switch (stat.kind()) {
    case StatisticsKind::Boltzmann: return xlogx_bregman(x, y);
    case StatisticsKind::FermiDiracMinusOne:
      if (x > 1.0 || y > 1.0) throw DomainError("FermiDiracMinusOne entropy requires x, y <= 1");
      return xlogx_bregman(x, y) + xlogx_bregman(1.0 - x, 1.0 - y);
    case StatisticsKind::FermiDiracHalf: {
      const double ey = stat.inverse(y);
      if (x > 0.0) {
        const double ex = stat.inverse(x);
        if (std::abs(ex - ey) < 1.0) {
          // H = int_{eta_y}^{eta_x} F'(s) (s - eta_y) ds, one-signed integrand
          auto f = [ey](double s) { return eval_fd_minus_half(s) * (s - ey); };
          return boost::math::quadrature::gauss<double, 10>::integrate(f, ey, ex);
        }
      }
      return stat.phi(x) - stat.phi(y) - ey * (x - y);
    }
  }
  return 0.0;
}

}  // namespace psim
