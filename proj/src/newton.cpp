#include <algorithm>
#include <cmath>

#include <Eigen/SparseLU>

#include "psim/errors.hpp"
#include "psim/system.hpp"

namespace psim {

void NewtonOptions::validate() const {
  if (!(abs_tol > 0.0)) throw ConfigError("newton abs_tol must be > 0");
  if (!(rel_tol >= 0.0)) throw ConfigError("newton rel_tol must be >= 0");
  if (!(step_tol > 0.0)) throw ConfigError("newton step_tol must be > 0");
  if (max_iters < 1) throw ConfigError("newton max_iters must be >= 1");
  if (!(damping_initial > 0.0 && damping_initial <= 1.0)) throw ConfigError("damping_initial must lie in (0, 1]");
  if (!(damping_growth >= 1.0)) throw ConfigError("damping_growth must be >= 1");
  if (max_backtracks < 0) throw ConfigError("max_backtracks must be >= 0");
  if (!(max_update >= 0.0)) throw ConfigError("max_update must be >= 0");
  if (!(noise_tol >= 0.0)) throw ConfigError("noise_tol must be >= 0");
}

namespace {

constexpr double kAnionEtaBound = 700.0;

// Largest t in (0, 1] keeping z_a (phi_a - psi) inside the safe window.
double anion_clamp(const Scenario& sc, const Layout& lay, const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
  double t = 1.0;
  const int za = sc.params.z_a;
  for (int k : sc.mesh.intrinsic_cells) {
    const int ia = lay.phi_a(k), ip = lay.psi(k, sc.mesh);
    const double e0 = za * (x[ia] - x[ip]);
    const double de = za * (dx[ia] - dx[ip]);
    if (std::abs(e0) > kAnionEtaBound || de == 0.0) continue;
    const double e1 = e0 + t * de;
    if (e1 > kAnionEtaBound) t = (kAnionEtaBound - e0) / de;
    else if (e1 < -kAnionEtaBound) t = (-kAnionEtaBound - e0) / de;
  }
  return std::max(t, 0.0);
}

bool finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

double residual_measure(const Scenario& sc, const State& st, const AssemblyRequest& req, const NewtonOptions& opts) {
  AssemblyRequest r = req;
  r.with_jacobian = opts.row_scaling;
  const ResidualSystem sys = assemble_residual(sc, st, r);
  if (!opts.row_scaling) return sys.residual.lpNorm<Eigen::Infinity>();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(sys.residual.size());
  for (int c = 0; c < sys.jacobian.outerSize(); ++c)
    for (Eigen::SparseMatrix<double>::InnerIterator e(sys.jacobian, c); e; ++e)
      m[e.row()] = std::max(m[e.row()], std::abs(e.value()));
  double out = 0.0;
  for (int i = 0; i < m.size(); ++i) out = std::max(out, std::abs(sys.residual[i]) / (m[i] > 0.0 ? m[i] : 1.0));
  return out;
}

State newton_solve(const Scenario& sc, const State& initial, const AssemblyRequest& req,
                   const NewtonOptions& opts, NewtonReport* report) {
  opts.validate();
  const Layout lay = make_layout(sc.mesh);
  AssemblyRequest jreq = req;
  jreq.with_jacobian = true;

  State st = initial;
  Eigen::VectorXd x = pack(sc, lay, st);
  ResidualSystem sys = assemble_residual(sc, st, jreq);
  if (!finite(sys.residual)) throw NoConvergence(0, std::numeric_limits<double>::infinity());

  // optional row equilibration: rows are measured relative to their largest
  // Jacobian entry, so exponentially small carriers still count
  Eigen::VectorXd rows = Eigen::VectorXd::Ones(lay.size);
  auto update_rows = [&](const Eigen::SparseMatrix<double>& J) {
    if (!opts.row_scaling) return;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(lay.size);
    for (int c = 0; c < J.outerSize(); ++c)
      for (Eigen::SparseMatrix<double>::InnerIterator e(J, c); e; ++e)
        m[e.row()] = std::max(m[e.row()], std::abs(e.value()));
    for (int i = 0; i < lay.size; ++i) rows[i] = m[i] > 0.0 ? 1.0 / m[i] : 1.0;
  };
  update_rows(sys.jacobian);

  double fnorm = rows.cwiseProduct(sys.residual).lpNorm<Eigen::Infinity>();
  double f2 = rows.cwiseProduct(sys.residual).norm();
  const double f0 = fnorm;
  auto residual_done = [&](double n) { return n <= opts.abs_tol || (opts.rel_tol > 0.0 && n <= opts.rel_tol * f0); };

  auto finish = [&](int iters) {
    if (report) {
      report->iterations = iters;
      report->residual_norm = fnorm;
    }
    st.time = initial.time;
    return st;
  };
  if (residual_done(fnorm)) return finish(0);

  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
  bool analyzed = false;
  double damping = opts.damping_initial;

  for (int it = 1; it <= opts.max_iters; ++it) {
    Eigen::SparseMatrix<double> J = opts.row_scaling ? Eigen::SparseMatrix<double>(rows.asDiagonal() * sys.jacobian)
                                                     : sys.jacobian;
    J.makeCompressed();
    if (!analyzed) {
      lu.analyzePattern(J);
      analyzed = true;
    }
    lu.factorize(J);
    if (lu.info() != Eigen::Success) throw NoConvergence(it, fnorm);
    Eigen::VectorXd dx = lu.solve(-rows.cwiseProduct(sys.residual));
    if (lu.info() != Eigen::Success || !finite(dx)) throw NoConvergence(it, fnorm);

    const double xnorm = x.lpNorm<Eigen::Infinity>();
    // far from the solution the linearization of exponentially small densities
    // asks for absurd potential changes; cap each component and take the step
    const bool limited = opts.max_update > 0.0 && dx.lpNorm<Eigen::Infinity>() > opts.max_update;
    if (limited) dx = dx.cwiseMax(-opts.max_update).cwiseMin(opts.max_update);
    const double clamp = anion_clamp(sc, lay, x, dx);
    const bool small_step = !limited && dx.lpNorm<Eigen::Infinity>() <= opts.step_tol * (1.0 + xnorm);

    double lam = small_step ? 1.0 : std::min({1.0, limited ? 1.0 : damping, clamp});
    if (!(lam > 0.0)) throw NoConvergence(it, fnorm);
    bool accepted = false;
    ResidualSystem trial;
    State tst = st;
    Eigen::VectorXd xt;
    for (int b = 0; b <= opts.max_backtracks; ++b) {
      xt = x + lam * dx;
      unpack(sc, lay, xt, tst);
      trial = assemble_residual(sc, tst, jreq);
      if (finite(trial.residual)) {
        const double t2 = rows.cwiseProduct(trial.residual).norm();
        if (small_step || limited || t2 <= (1.0 - 1e-4 * lam) * f2) {
          accepted = true;
          break;
        }
      }
      if (b == opts.max_backtracks) break;
      lam *= 0.5;
    }
    if (!finite(trial.residual)) throw NoConvergence(it, fnorm);
    // no descent left and the residual is at round-off level: done
    if (!accepted && fnorm <= opts.noise_tol) return finish(it - 1);
    // no sufficient decrease: keep the shortest trial step and move on

    x = xt;
    st = tst;
    sys = std::move(trial);
    update_rows(sys.jacobian);
    fnorm = rows.cwiseProduct(sys.residual).lpNorm<Eigen::Infinity>();
    f2 = rows.cwiseProduct(sys.residual).norm();
    damping = accepted ? std::min(1.0, lam * opts.damping_growth) : std::max(lam, 1e-4);

    if (small_step || residual_done(fnorm)) return finish(it);
    if (lam == 1.0 && (lam * dx).lpNorm<Eigen::Infinity>() <= opts.step_tol * (1.0 + xnorm)) return finish(it);
  }
  throw NoConvergence(opts.max_iters, fnorm);
}

}  // namespace psim
