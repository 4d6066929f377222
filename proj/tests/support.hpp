#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>

#include "psim/config.hpp"
#include "psim/system.hpp"

namespace psim::testing {

inline std::filesystem::path source_path(const std::string& rel) {
  return std::filesystem::path(PSIM_SOURCE_DIR) / rel;
}

inline RunConfig shipped(const std::string& name) { return load_config(source_path("configs/" + name)); }

/// `base` with every potential shifted by an independent uniform draw in [-spread, spread].
inline State perturbed(const State& base, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> u(-spread, spread);
  State st = base;
  for (auto* v : {&st.psi, &st.phi_n, &st.phi_p, &st.phi_a})
    for (double& x : *v) x += u(rng);
  return st;
}

/// Largest entrywise difference between the analytic Jacobian and central
/// differences of the residual, each row scaled by its largest analytic entry.
inline double jacobian_fd_error(const Scenario& sc, const State& st, const AssemblyRequest& req) {
  const Layout lay = make_layout(sc.mesh);
  const ResidualSystem rs = assemble_residual(sc, st, req);
  const Eigen::MatrixXd J(rs.jacobian);
  const int n = lay.size;
  Eigen::VectorXd row_scale = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) row_scale[i] = std::max(J.row(i).cwiseAbs().maxCoeff(), 1e-300);

  AssemblyRequest r2 = req;
  r2.with_jacobian = false;
  const Eigen::VectorXd x0 = pack(sc, lay, st);
  double worst = 0.0;
  for (int j = 0; j < n; ++j) {
    const double h = 1e-6 * std::max(1.0, std::abs(x0[j]));
    State sp = st, sm = st;
    Eigen::VectorXd xp = x0, xm = x0;
    xp[j] += h;
    xm[j] -= h;
    unpack(sc, lay, xp, sp);
    unpack(sc, lay, xm, sm);
    const Eigen::VectorXd col =
        (assemble_residual(sc, sp, r2).residual - assemble_residual(sc, sm, r2).residual) / (xp[j] - xm[j]);
    for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(col[i] - J(i, j)) / row_scale[i]);
  }
  return worst;
}

inline double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

inline double sup_diff(const State& a, const State& b) {
  return std::max({sup_diff(a.psi, b.psi), sup_diff(a.phi_n, b.phi_n), sup_diff(a.phi_p, b.phi_p),
                   sup_diff(a.phi_a, b.phi_a)});
}

}  // namespace psim::testing
