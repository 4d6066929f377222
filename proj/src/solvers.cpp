#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/SparseCholesky>
#include <boost/math/tools/roots.hpp>

#include "psim/errors.hpp"
#include "psim/system.hpp"

namespace psim {

namespace {

struct PoissonEval {
  Eigen::VectorXd grad;
  std::vector<double> diag;   // Hessian diagonal
  std::vector<double> scale;  // magnitude of the terms in each row
};

// Gradient and Hessian of the Poisson functional for frozen quasi Fermi potentials.
PoissonEval poisson_gradient(const Scenario& sc, const State& qfp, const std::vector<double>& psi) {
  const Mesh& mesh = sc.mesh;
  const auto& P = sc.params;
  const int nc = mesh.num_cells();
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = P.z_a;
  PoissonEval ev;
  ev.grad = Eigen::VectorXd::Zero(nc);
  ev.diag.assign(nc, 0.0);
  ev.scale.assign(nc, 0.0);
  for (int k = 0; k < nc; ++k) {
    const auto& c = sc.coeff(k);
    const double m = mesh.cells[k].measure;
    const double en = zn * (qfp.phi_n[k] - psi[k]) + zn * c.E_n;
    const double ep = zp * (qfp.phi_p[k] - psi[k]) + zp * c.E_p;
    const double n = c.N_n * sc.stat_n.eval(en), p = c.N_p * sc.stat_p.eval(ep);
    ev.grad[k] -= P.delta * m * (zn * n + zp * p + sc.doping[k]);
    ev.diag[k] += P.delta * m * (zn * zn * c.N_n * sc.stat_n.deriv(en) + zp * zp * c.N_p * sc.stat_p.deriv(ep));
    ev.scale[k] += P.delta * m * (n + p + std::abs(sc.doping[k]));
    const int ia = mesh.intrinsic_index[k];
    if (ia >= 0) {
      const double ea = za * (qfp.phi_a[ia] - psi[k]) + za * c.E_a;
      const double a = c.N_a * sc.stat_a.eval(ea);
      ev.grad[k] -= m * za * a;
      ev.diag[k] += m * za * za * c.N_a * sc.stat_a.deriv(ea);
      ev.scale[k] += m * a;
    }
  }
  const double lam2 = P.lambda * P.lambda;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const double t = lam2 * sc.face_factor(f, &RegionCoefficients::eps) * f.transmissibility;
    const int k = f.cell_k;
    if (f.kind == FaceKind::Interior) {
      const double d = psi[f.cell_l] - psi[k];
      ev.grad[k] -= t * d;
      ev.grad[f.cell_l] += t * d;
      ev.scale[k] += std::abs(t * d);
      ev.scale[f.cell_l] += std::abs(t * d);
    } else {
      const double d = sc.psiD_face(f.dirichlet_slot) - psi[k];
      ev.grad[k] -= t * d;
      ev.scale[k] += std::abs(t * d);
    }
  }
  return ev;
}

double functional_value(const Scenario& sc, const State& qfp, const std::vector<double>& psi) {
  const Mesh& mesh = sc.mesh;
  const auto& P = sc.params;
  const int zn = DimensionlessParams::z_n, zp = DimensionlessParams::z_p, za = P.z_a;
  const double lam2 = P.lambda * P.lambda;
  double J = 0.0;
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const double t = lam2 * sc.face_factor(f, &RegionCoefficients::eps) * f.transmissibility;
    const double other = f.kind == FaceKind::Interior ? psi[f.cell_l] : sc.psiD_face(f.dirichlet_slot);
    const double d = other - psi[f.cell_k];
    J += 0.5 * t * d * d;
  }
  for (int k = 0; k < mesh.num_cells(); ++k) {
    const auto& c = sc.coeff(k);
    const double m = mesh.cells[k].measure;
    const double en = zn * (qfp.phi_n[k] - psi[k]) + zn * c.E_n;
    const double ep = zp * (qfp.phi_p[k] - psi[k]) + zp * c.E_p;
    J += m * P.delta * (c.N_n * sc.stat_n.primitive(en) + c.N_p * sc.stat_p.primitive(ep) - sc.doping[k] * psi[k]);
    const int ia = mesh.intrinsic_index[k];
    if (ia >= 0) J += m * c.N_a * sc.stat_a.primitive(za * (qfp.phi_a[ia] - psi[k]) + za * c.E_a);
  }
  return J;
}

Eigen::SparseMatrix<double> poisson_hessian(const Scenario& sc, const std::vector<double>& diag) {
  const Mesh& mesh = sc.mesh;
  const double lam2 = sc.params.lambda * sc.params.lambda;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(3 * diag.size());
  for (size_t k = 0; k < diag.size(); ++k) trip.emplace_back(k, k, diag[k]);
  for (const Face& f : mesh.faces) {
    if (f.kind == FaceKind::NeumannBoundary) continue;
    const double t = lam2 * sc.face_factor(f, &RegionCoefficients::eps) * f.transmissibility;
    const int k = f.cell_k;
    trip.emplace_back(k, k, t);
    if (f.kind == FaceKind::Interior) {
      trip.emplace_back(f.cell_l, f.cell_l, t);
      trip.emplace_back(k, f.cell_l, -t);
      trip.emplace_back(f.cell_l, k, -t);
    }
  }
  Eigen::SparseMatrix<double> H(diag.size(), diag.size());
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

}  // namespace

double poisson_functional(const Scenario& sc, const State& st) { return functional_value(sc, st, st.psi); }

std::vector<double> solve_poisson_given_qfp(const Scenario& sc, const State& qfp, const std::vector<double>& guess,
                                            std::vector<double>* functional_trace) {
  const int nc = sc.mesh.num_cells();
  std::vector<double> psi = guess;
  if (static_cast<int>(psi.size()) != nc) psi.assign(nc, 0.0);
  double J = functional_value(sc, qfp, psi);
  if (functional_trace) functional_trace->push_back(J);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
  bool analyzed = false;
  constexpr int kMaxIters = 200;
  double gnorm = std::numeric_limits<double>::infinity();
  for (int it = 0; it < kMaxIters; ++it) {
    const PoissonEval ev = poisson_gradient(sc, qfp, psi);
    gnorm = ev.grad.lpNorm<Eigen::Infinity>();
    double scale = 1.0;
    for (double s : ev.scale) scale = std::max(scale, s);
    if (gnorm <= 1e-12 * scale) return psi;
    const auto H = poisson_hessian(sc, ev.diag);
    if (!analyzed) {
      ldlt.analyzePattern(H);
      analyzed = true;
    }
    ldlt.factorize(H);
    if (ldlt.info() != Eigen::Success) throw NoConvergence(it, gnorm);
    const Eigen::VectorXd d = ldlt.solve(-ev.grad);
    if (!d.allFinite()) throw NoConvergence(it, gnorm);
    const double slope = ev.grad.dot(d);
    double psinorm = 0.0;
    for (double v : psi) psinorm = std::max(psinorm, std::abs(v));
    const bool tiny = d.lpNorm<Eigen::Infinity>() <= 1e-14 * (1.0 + psinorm);
    // below this predicted decrease the functional values are round-off
    const bool flat = -slope <= 1e-12 * (1.0 + std::abs(J));

    std::vector<double> trial(nc);
    double Jt = J;
    if (flat) {
      for (int k = 0; k < nc; ++k) trial[k] = psi[k] + d[k];
      const double gt = poisson_gradient(sc, qfp, trial).grad.lpNorm<Eigen::Infinity>();
      if (!(gt < gnorm)) {
        if (gnorm <= 1e-9 * scale) return psi;
        throw NoConvergence(it, gnorm);
      }
      Jt = functional_value(sc, qfp, trial);
    } else {
      double t = 1.0;
      bool ok = false;
      for (int b = 0; b < 60; ++b) {
        for (int k = 0; k < nc; ++k) trial[k] = psi[k] + t * d[k];
        Jt = functional_value(sc, qfp, trial);
        if (std::isfinite(Jt) && Jt <= J + 1e-4 * t * slope) {
          ok = true;
          break;
        }
        t *= 0.5;
      }
      if (!ok) throw NoConvergence(it, gnorm);
    }
    psi.swap(trial);
    J = Jt;
    if (functional_trace) functional_trace->push_back(Jt);
    if (tiny) return psi;
  }
  throw NoConvergence(kMaxIters, gnorm);
}

State solve_poisson_with_anion_mass(const Scenario& sc, const State& qfp, double anion_mass_target) {
  const double cap = sc.intrinsic_capacity();
  if (!(anion_mass_target > 0.0) || !(anion_mass_target < cap))
    throw MassOutOfRange("anion mass target must lie in (0, " + std::to_string(cap) + ")");
  const Mesh& mesh = sc.mesh;
  const int nc = mesh.num_cells();
  State st = qfp;
  st.phi_a.assign(mesh.num_intrinsic(), 0.0);
  if (static_cast<int>(st.psi.size()) != nc) {
    st.psi.resize(nc);
    for (int k = 0; k < nc; ++k) st.psi[k] = sc.psiD_at(mesh.cells[k].center);
  }

  // start from the potential that fills a flat psi to the requested level
  const int za = sc.params.z_a;
  double psi_mean = 0.0;
  for (int k : mesh.intrinsic_cells) psi_mean += st.psi[k];
  psi_mean /= mesh.num_intrinsic();
  const double Ea = sc.coeff(mesh.intrinsic_cells.front()).E_a;
  const double fill = std::clamp(anion_mass_target / cap, 1e-300, 1.0 - 1e-16);
  const double c0 = psi_mean - Ea + sc.stat_a.inverse(fill) / za;

  std::vector<double> psi_warm = st.psi;
  auto mass_defect = [&](double c) {
    std::fill(st.phi_a.begin(), st.phi_a.end(), c);
    psi_warm = solve_poisson_given_qfp(sc, st, psi_warm);
    st.psi = psi_warm;
    return anion_mass(sc, st) - anion_mass_target;
  };

  // mass grows with z_a phi_a
  double lo = c0 - 0.5, hi = c0 + 0.5;
  double flo = mass_defect(lo), fhi = mass_defect(hi);
  for (int expand = 0; flo * fhi > 0.0; ++expand) {
    if (expand > 60) throw NoConvergence(expand, std::min(std::abs(flo), std::abs(fhi)));
    const double w = hi - lo;
    if ((flo > 0.0) == (za > 0)) {
      lo -= w;
      flo = mass_defect(lo);
    } else {
      hi += w;
      fhi = mass_defect(hi);
    }
  }
  double root = lo;
  if (fhi == 0.0) {
    root = hi;
  } else if (flo != 0.0) {
    constexpr boost::uintmax_t kMaxRootIters = 200;
    boost::uintmax_t iters = kMaxRootIters;
    const auto tol = [](double a, double b) {
      return std::abs(a - b) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(a));
    };
    const auto r = boost::math::tools::toms748_solve(mass_defect, lo, hi, flo, fhi, tol, iters);
    root = 0.5 * (r.first + r.second);
    if (iters >= kMaxRootIters) throw NoConvergence(static_cast<int>(iters), std::abs(mass_defect(root)));
  }
  mass_defect(root);
  return st;
}

State solve_equilibrium(const Scenario& sc, double anion_mass_target, const NewtonOptions& opts) {
  opts.validate();
  if (!sc.dirichlet.constant()) throw ConfigError("equilibrium needs constant Dirichlet data");
  for (double g : sc.generation)
    if (g != 0.0) throw ConfigError("equilibrium needs zero generation");
  const int nc = sc.mesh.num_cells();
  State st;
  st.phi_n.assign(nc, sc.dirichlet.phi_left);
  st.phi_p.assign(nc, sc.dirichlet.phi_left);
  st.psi.assign(nc, sc.dirichlet.psi_left);
  return solve_poisson_with_anion_mass(sc, st, anion_mass_target);
}

State solve_steady_state(const Scenario& sc, const State& initial_guess, double tau0, const NewtonOptions& opts,
                         NewtonReport* report) {
  opts.validate();
  if (!(tau0 > 0.0)) throw ConfigError("pseudo-transient start step must be > 0");
  AssemblyRequest sreq;
  sreq.mode = AssemblyMode::Stationary;
  sreq.anion_mass_target = anion_mass(sc, initial_guess);

  {
    const double r = residual_measure(sc, initial_guess, sreq, opts);
    if (r <= opts.abs_tol) {
      if (report) *report = NewtonReport{0, r};
      return initial_guess;
    }
  }

  const Layout lay = make_layout(sc.mesh);
  State st = initial_guess;
  double tau = tau0;
  int failures = 0;
  constexpr double kTauStationary = 1e6;
  for (int step = 0; step < 400; ++step) {
    AssemblyRequest treq;
    treq.mode = AssemblyMode::Transient;
    treq.old_state = &st;
    treq.tau = tau;
    try {
      State next = newton_solve(sc, st, treq, opts);
      const double change = (pack(sc, lay, next) - pack(sc, lay, st)).lpNorm<Eigen::Infinity>();
      st = next;
      tau *= 10.0;
      failures = 0;
      if (tau >= kTauStationary || change <= 1e-8) {
        try {
          State out = newton_solve(sc, st, sreq, opts, report);
          out.time = initial_guess.time;
          return out;
        } catch (const NoConvergence&) {
          // keep marching
        }
      }
    } catch (const NoConvergence&) {
      tau /= 10.0;
      if (++failures > 8) break;
    }
  }
  throw NoConvergence(opts.max_iters, std::numeric_limits<double>::quiet_NaN());
}

std::vector<double> TimeGrid::nodes() const {
  validate();
  std::vector<double> out{t_start};
  if (!steps.empty()) {
    double t = t_start;
    for (double s : steps) {
      t += s;
      out.push_back(t);
    }
    out.back() = t_end;
    return out;
  }
  const long n = std::lround((t_end - t_start) / step);
  for (long i = 1; i < n; ++i) out.push_back(t_start + static_cast<double>(i) * step);
  out.push_back(t_end);
  return out;
}

void TimeGrid::validate() const {
  if (!(t_end > t_start)) throw ConfigError("time grid needs t_end > t_start");
  const double span = t_end - t_start;
  if (!steps.empty()) {
    double sum = 0.0;
    for (double s : steps) {
      if (!(s > 0.0)) throw ConfigError("time steps must be positive");
      sum += s;
    }
    if (std::abs(sum - span) > 1e-12 * span) throw ConfigError("time steps must add up to t_end - t_start");
    return;
  }
  if (!(step > 0.0)) throw ConfigError("time step must be positive");
  const double n = span / step;
  if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n) || std::round(n) < 1.0)
    throw ConfigError("time step must divide t_end - t_start");
}

State switch_on_generation(const Scenario& sc, const State& from, double tau, const NewtonOptions& opts) {
  if (!(tau > 0.0)) throw ConfigError("generation switch-on step must be > 0");
  AssemblyRequest req;
  req.mode = AssemblyMode::Transient;
  req.old_state = &from;
  req.tau = tau;
  Scenario staged = sc;
  State guess = from;
  // log10 of the generation factor; the first stage is a near copy of `from`
  double level = -40.0, stride = 1.0;
  for (int stage = 0; stage < 400; ++stage) {
    const double target = std::min(0.0, level + stride);
    const double factor = std::pow(10.0, target);
    for (size_t k = 0; k < sc.generation.size(); ++k) staged.generation[k] = factor * sc.generation[k];
    try {
      guess = newton_solve(staged, guess, req, opts);
      level = target;
      stride = std::min(2.0 * stride, 1.0);
      if (level == 0.0) {
        guess.time = from.time + tau;
        return guess;
      }
    } catch (const NoConvergence&) {
      stride *= 0.25;
      if (stride < 1e-3) throw;
    }
  }
  throw NoConvergence(400, std::nan(""));
}

State run_transient(const Scenario& sc, const TimeGrid& grid, const State& initial, const NewtonOptions& opts,
                    const StateSink& sink) {
  const auto nodes = grid.nodes();
  State st = initial;
  st.time = nodes.front();
  if (sink) sink(st);
  for (size_t i = 1; i < nodes.size(); ++i) {
    const double target = nodes[i];
    double tau = target - st.time;
    int halvings = 0;
    while (st.time < target) {
      const double remaining = target - st.time;
      const bool last = tau >= remaining * (1.0 - 1e-12);
      const double h = last ? remaining : tau;
      AssemblyRequest req;
      req.mode = AssemblyMode::Transient;
      req.old_state = &st;
      req.tau = h;
      try {
        State next = newton_solve(sc, st, req, opts);
        next.time = last ? target : st.time + h;
        st = std::move(next);
      } catch (const NoConvergence&) {
        if (++halvings > 10) throw StepFailure(st.time, h);
        tau = 0.5 * h;
      }
    }
    if (sink) sink(st);
  }
  return st;
}

}  // namespace psim
