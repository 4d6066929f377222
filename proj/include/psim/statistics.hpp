#pragma once

#include <string>

namespace psim {

enum class StatisticsKind { Boltzmann, FermiDiracHalf, FermiDiracMinusOne };

StatisticsKind parse_statistics_kind(const std::string& name);
std::string to_string(StatisticsKind kind);

/// Complete Fermi-Dirac integrals F_j(eta) normalized by 1/Gamma(j+1),
/// so that d/deta F_j = F_{j-1}.
double eval_fd_half(double eta);
double eval_fd_minus_half(double eta);
double eval_fd_three_halves(double eta);

/// Statistics function bundle: density as function of chemical potential,
/// its inverse and the entropy Phi with Phi' = inverse.
class Statistics {
 public:
  explicit Statistics(StatisticsKind kind = StatisticsKind::Boltzmann) : kind_(kind) {}

  StatisticsKind kind() const { return kind_; }

  double eval(double eta) const;
  double deriv(double eta) const;
  double inverse(double x) const;
  double phi(double x) const;
  double phi_prime(double x) const { return inverse(x); }

  // log(eval(eta)) without overflow/underflow
  double log_eval(double eta) const;
  // deriv/eval, the derivative of log_eval
  double log_deriv(double eta) const;
  // antiderivative of eval in eta (zero at -infinity)
  double primitive(double eta) const;

 private:
  StatisticsKind kind_;
};

Statistics make_statistics(StatisticsKind kind);

/// H(x, y) = Phi(x) - Phi(y) - Phi'(y)(x - y)
double relative_entropy_h(const Statistics& stat, double x, double y);

}  // namespace psim
