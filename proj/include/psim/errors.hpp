#pragma once

#include <stdexcept>
#include <string>

namespace psim {

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MeshMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateFace : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MassOutOfRange : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoConvergence : std::runtime_error {
  NoConvergence(int iters, double norm)
      : std::runtime_error("Newton did not converge after " + std::to_string(iters) +
                           " iterations, residual " + std::to_string(norm)),
        iterations(iters), final_norm(norm) {}
  int iterations;
  double final_norm;
};

struct StepFailure : std::runtime_error {
  StepFailure(double t, double tau)
      : std::runtime_error("time step failed at t = " + std::to_string(t) +
                           " after halving to tau = " + std::to_string(tau)),
        time(t), last_tau(tau) {}
  double time;
  double last_tau;
};

}  // namespace psim
