#include "psim/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <boost/math/tools/roots.hpp>
#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include "psim/errors.hpp"

namespace psim {

namespace {

const std::array<const char*, 3> kRegionKeys{"htl", "intrinsic", "etl"};

void check_keys(const toml::table& t, std::initializer_list<std::string_view> allowed, const std::string& where) {
  for (const auto& [key, node] : t) {
    (void)node;
    if (std::find(allowed.begin(), allowed.end(), key.str()) == allowed.end())
      throw ConfigError("unknown key '" + std::string(key.str()) + "' in [" + where + "]");
  }
}

const toml::table* subtable(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return nullptr;
  const toml::table* s = n->as_table();
  if (!s) throw ConfigError("'" + where + "." + std::string(key) + "' must be a table");
  return s;
}

double get_number(const toml::table& t, std::string_view key, const std::string& where, double fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value<double>()) return *v;
  throw ConfigError("'" + where + "." + std::string(key) + "' must be a number");
}

double require_number(const toml::table& t, std::string_view key, const std::string& where) {
  if (!t.get(key)) throw ConfigError("missing '" + where + "." + std::string(key) + "'");
  return get_number(t, key, where, 0.0);
}

int get_int(const toml::table& t, std::string_view key, const std::string& where, int fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value_exact<int64_t>()) return static_cast<int>(*v);
  throw ConfigError("'" + where + "." + std::string(key) + "' must be an integer");
}

bool get_bool(const toml::table& t, std::string_view key, const std::string& where, bool fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value_exact<bool>()) return *v;
  throw ConfigError("'" + where + "." + std::string(key) + "' must be a boolean");
}

std::string get_string(const toml::table& t, std::string_view key, const std::string& where,
                       const std::string& fallback) {
  const toml::node* n = t.get(key);
  if (!n) return fallback;
  if (auto v = n->value_exact<std::string>()) return *v;
  throw ConfigError("'" + where + "." + std::string(key) + "' must be a string");
}

std::vector<double> get_numbers(const toml::table& t, std::string_view key, const std::string& where) {
  std::vector<double> out;
  const toml::node* n = t.get(key);
  if (!n) return out;
  const toml::array* arr = n->as_array();
  if (!arr) throw ConfigError("'" + where + "." + std::string(key) + "' must be an array of numbers");
  for (const auto& e : *arr) {
    auto v = e.value<double>();
    if (!v) throw ConfigError("'" + where + "." + std::string(key) + "' must be an array of numbers");
    out.push_back(*v);
  }
  return out;
}

std::array<bool, 3> get_regions(const toml::table& t, std::string_view key, const std::string& where) {
  const toml::node* n = t.get(key);
  if (!n) return {true, true, true};
  const toml::array* arr = n->as_array();
  if (!arr) throw ConfigError("'" + where + "." + std::string(key) + "' must be an array of region names");
  std::array<bool, 3> out{false, false, false};
  for (const auto& e : *arr) {
    auto s = e.value_exact<std::string>();
    const auto it = s ? std::find(kRegionKeys.begin(), kRegionKeys.end(), *s) : kRegionKeys.end();
    if (it == kRegionKeys.end()) throw ConfigError("'" + where + "." + std::string(key) + "' has an unknown region");
    out[it - kRegionKeys.begin()] = true;
  }
  return out;
}

StatisticsKind get_statistics(const toml::table& t, std::string_view key, StatisticsKind fallback) {
  const std::string s = get_string(t, key, "statistics", "");
  return s.empty() ? fallback : parse_statistics_kind(s);
}

DirichletSpec parse_dirichlet(const toml::table& t, std::string_view key, bool required) {
  const toml::node* n = t.get(key);
  const std::string where = "dirichlet." + std::string(key);
  if (!n) {
    if (required) throw ConfigError("missing '" + where + "'");
    return {};
  }
  if (auto v = n->value<double>()) return {"const", *v};
  auto s = n->value_exact<std::string>();
  if (!s) throw ConfigError("'" + where + "' must be a number or a formula string");
  static const std::regex pattern(R"(\s*([a-z_]+)\s*\(\s*([-+0-9.eE]+)\s*\)\s*)");
  std::smatch m;
  if (!std::regex_match(*s, m, pattern)) throw ConfigError("'" + where + "': cannot parse formula '" + *s + "'");
  const std::string name = m[1];
  if (name != "const" && name != "arcsinh_half_doping_plus" && name != "charge_neutral")
    throw ConfigError("'" + where + "': formula '" + name + "' is not in the whitelist");
  double value = 0.0;
  try {
    size_t used = 0;
    value = std::stod(m[2], &used);
    if (static_cast<long>(used) != m[2].length()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("'" + where + "': bad formula argument");
  }
  return {name, value};
}

RegionCoefficients parse_coefficients(const toml::table& t, const std::string& where) {
  check_keys(t, {"eps", "mu_n", "mu_p", "mu_a", "N_n", "N_p", "N_a", "E_n", "E_p", "E_a"}, where);
  RegionCoefficients c;
  c.eps = get_number(t, "eps", where, c.eps);
  c.mu_n = get_number(t, "mu_n", where, c.mu_n);
  c.mu_p = get_number(t, "mu_p", where, c.mu_p);
  c.mu_a = get_number(t, "mu_a", where, c.mu_a);
  c.N_n = get_number(t, "N_n", where, c.N_n);
  c.N_p = get_number(t, "N_p", where, c.N_p);
  c.N_a = get_number(t, "N_a", where, c.N_a);
  c.E_n = get_number(t, "E_n", where, c.E_n);
  c.E_p = get_number(t, "E_p", where, c.E_p);
  c.E_a = get_number(t, "E_a", where, c.E_a);
  for (double v : {c.eps, c.mu_n, c.mu_p, c.mu_a, c.N_n, c.N_p, c.N_a})
    if (!(v > 0.0)) throw ConfigError("[" + where + "]: eps, mobilities and densities of states must be positive");
  return c;
}

LayerPhysical parse_layer(const toml::table& t, const std::string& where, bool intrinsic) {
  check_keys(t, {"eps_s", "mu_n", "mu_p", "mu_a", "N_n", "N_p", "N_a", "E_n", "E_p", "E_a", "doping"}, where);
  LayerPhysical L;
  L.eps_s = require_number(t, "eps_s", where);
  L.mu_n = require_number(t, "mu_n", where);
  L.mu_p = require_number(t, "mu_p", where);
  L.N_n = require_number(t, "N_n", where);
  L.N_p = require_number(t, "N_p", where);
  L.E_n = require_number(t, "E_n", where);
  L.E_p = require_number(t, "E_p", where);
  L.doping = get_number(t, "doping", where, 0.0);
  if (intrinsic) {
    L.mu_a = require_number(t, "mu_a", where);
    L.N_a = require_number(t, "N_a", where);
    L.E_a = require_number(t, "E_a", where);
  } else {
    L.mu_a = get_number(t, "mu_a", where, 0.0);
    L.N_a = get_number(t, "N_a", where, 0.0);
    L.E_a = get_number(t, "E_a", where, 0.0);
  }
  return L;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "TOML syntax error: " << e.description() << " (line " << e.source().begin.line << ")";
    throw ConfigError(msg.str());
  }
  check_keys(root, {"model", "mesh", "params", "physical", "statistics", "coefficients", "doping", "generation",
                    "recombination", "dirichlet", "initial", "time", "solver", "output", "equilibrium"},
             "root");

  RunConfig cfg;
  cfg.text = text;
  ModelSpec& M = cfg.model;

  std::string mode = "dimensionless";
  if (auto t = subtable(root, "model", "root")) {
    check_keys(*t, {"mode"}, "model");
    mode = get_string(*t, "mode", "model", mode);
  }
  if (mode != "dimensionless" && mode != "physical")
    throw ConfigError("model.mode must be 'dimensionless' or 'physical'");
  const bool physical = mode == "physical";

  // physical parameters first: they fix the length and time scales
  double length_scale = 1.0, time_scale = 1.0, UT = 1.0;
  if (physical) {
    const toml::table* t = subtable(root, "physical", "root");
    if (!t) throw ConfigError("physical mode needs a [physical] table");
    check_keys(*t, {"l", "T", "eps_s", "N_tilde", "N_a_tilde", "mu_tilde", "mu_a_tilde", "F_ph", "alpha_g", "z_a",
                    "provenance", "htl", "intrinsic", "etl"},
               "physical");
    PhysicalParams P;
    P.l = require_number(*t, "l", "physical");
    P.T = require_number(*t, "T", "physical");
    P.eps_s = require_number(*t, "eps_s", "physical");
    P.N_tilde = require_number(*t, "N_tilde", "physical");
    P.N_a_tilde = require_number(*t, "N_a_tilde", "physical");
    P.mu_tilde = require_number(*t, "mu_tilde", "physical");
    P.mu_a_tilde = require_number(*t, "mu_a_tilde", "physical");
    P.F_ph = get_number(*t, "F_ph", "physical", 0.0);
    P.alpha_g = get_number(*t, "alpha_g", "physical", 0.0);
    P.z_a = get_int(*t, "z_a", "physical", 1);
    M.provenance = get_string(*t, "provenance", "physical", "");
    for (int r = 0; r < 3; ++r) {
      const std::string where = std::string("physical.") + kRegionKeys[r];
      const toml::table* lt = subtable(*t, kRegionKeys[r], "physical");
      if (!lt) throw ConfigError("missing [" + where + "]");
      P.layers[r] = parse_layer(*lt, where, r == 1);
    }
    P.validate();
    M.physical = P;
    M.params = nondimensionalize(P);
    M.coeffs = region_coefficients(P);
    for (int r = 0; r < 3; ++r) M.doping[r] = P.layers[r].doping / P.N_tilde;
    length_scale = P.l;
    time_scale = P.time_scale();
    UT = P.thermal_voltage();
    for (const char* k : {"params", "coefficients", "doping"})
      if (root.get(k)) throw ConfigError(std::string("[") + k + "] is derived in physical mode; remove it");
  } else {
    if (root.get("physical")) throw ConfigError("[physical] needs model.mode = 'physical'");
    if (auto t = subtable(root, "params", "root")) {
      check_keys(*t, {"lambda", "nu", "delta", "gamma", "z_a"}, "params");
      M.params.lambda = get_number(*t, "lambda", "params", 1.0);
      M.params.nu = get_number(*t, "nu", "params", 1.0);
      M.params.delta = get_number(*t, "delta", "params", 1.0);
      M.params.gamma = get_number(*t, "gamma", "params", 1.0);
      M.params.z_a = get_int(*t, "z_a", "params", 1);
    }
    if (auto t = subtable(root, "coefficients", "root")) {
      check_keys(*t, {"htl", "intrinsic", "etl"}, "coefficients");
      for (int r = 0; r < 3; ++r)
        if (auto ct = subtable(*t, kRegionKeys[r], "coefficients"))
          M.coeffs[r] = parse_coefficients(*ct, std::string("coefficients.") + kRegionKeys[r]);
    }
    if (auto t = subtable(root, "doping", "root")) {
      check_keys(*t, {"htl", "intrinsic", "etl", "value"}, "doping");
      const double all = get_number(*t, "value", "doping", 0.0);
      for (int r = 0; r < 3; ++r) M.doping[r] = get_number(*t, kRegionKeys[r], "doping", all);
    }
  }
  M.params.validate();

  {
    const toml::table* t = subtable(root, "mesh", "root");
    if (!t) throw ConfigError("missing [mesh]");
    check_keys(*t, {"breakpoints", "nodes_per_region", "level"}, "mesh");
    const auto bp = get_numbers(*t, "breakpoints", "mesh");
    if (bp.size() != 4) throw ConfigError("mesh.breakpoints needs four numbers");
    for (int i = 0; i < 4; ++i) M.breakpoints[i] = bp[i] / length_scale;
    for (int i = 0; i < 3; ++i)
      if (!(M.breakpoints[i] < M.breakpoints[i + 1])) throw ConfigError("mesh.breakpoints must increase");
    if (t->get("level") && t->get("nodes_per_region"))
      throw ConfigError("give either mesh.level or mesh.nodes_per_region");
    if (t->get("level")) {
      const int level = get_int(*t, "level", "mesh", 0);
      if (level < 1 || level > 20) throw ConfigError("mesh.level must lie in [1, 20]");
      M.nodes_per_region = nodes_for_level(level);
    } else {
      M.nodes_per_region = get_int(*t, "nodes_per_region", "mesh", 0);
    }
    if (M.nodes_per_region < 2) throw ConfigError("mesh.nodes_per_region must be at least 2");
  }

  if (auto t = subtable(root, "statistics", "root")) {
    check_keys(*t, {"n", "p", "a"}, "statistics");
    M.stat_n = get_statistics(*t, "n", M.stat_n);
    M.stat_p = get_statistics(*t, "p", M.stat_p);
    M.stat_a = get_statistics(*t, "a", M.stat_a);
  }

  if (auto t = subtable(root, "generation", "root")) {
    check_keys(*t, {"kind", "value", "alpha", "incident", "regions"}, "generation");
    auto& G = M.generation;
    G.kind = get_string(*t, "kind", "generation", "zero");
    if (G.kind != "zero" && G.kind != "constant" && G.kind != "beer_lambert")
      throw ConfigError("generation.kind must be zero, constant or beer_lambert");
    G.value = get_number(*t, "value", "generation", G.kind == "beer_lambert" ? 1.0 : 0.0);
    if (physical && G.kind == "beer_lambert" && t->get("value"))
      throw ConfigError("generation.value is fixed by physical.F_ph in physical mode");
    if (!(G.value >= 0.0)) throw ConfigError("generation.value must be non-negative");
    // physical mode takes alpha_g from [physical] in 1/cm
    G.alpha = physical ? M.physical->alpha_g * length_scale : get_number(*t, "alpha", "generation", 0.0);
    if (physical && t->get("alpha")) throw ConfigError("generation.alpha comes from physical.alpha_g in physical mode");
    if (!(G.alpha >= 0.0)) throw ConfigError("generation.alpha must be non-negative");
    const std::string inc = get_string(*t, "incident", "generation", "left");
    if (inc != "left" && inc != "right") throw ConfigError("generation.incident must be 'left' or 'right'");
    G.from_right = inc == "right";
    G.regions = get_regions(*t, "regions", "generation");
  }

  if (auto t = subtable(root, "recombination", "root")) {
    check_keys(*t, {"enabled", "r0", "tau_n", "tau_p", "n_n_tau", "n_p_tau", "srh_standard_lifetimes", "regions"},
               "recombination");
    auto& R = M.recombination;
    R.enabled = get_bool(*t, "enabled", "recombination", true);
    R.r0 = get_number(*t, "r0", "recombination", 0.0);
    R.tau_n = get_number(*t, "tau_n", "recombination", 0.0);
    R.tau_p = get_number(*t, "tau_p", "recombination", 0.0);
    R.n_n_tau = get_number(*t, "n_n_tau", "recombination", 0.0);
    R.n_p_tau = get_number(*t, "n_p_tau", "recombination", 0.0);
    R.srh_standard_lifetimes = get_bool(*t, "srh_standard_lifetimes", "recombination", false);
    if (physical) {
      const auto& P = *M.physical;
      const double rate_scale = P.l * P.l / (P.mu_tilde * UT);  // seconds per dimensionless carrier time
      R.r0 *= P.N_tilde * rate_scale;
      R.tau_n /= rate_scale;
      R.tau_p /= rate_scale;
      R.n_n_tau /= P.N_tilde;
      R.n_p_tau /= P.N_tilde;
    }
    R.validate();
    M.recombination_regions = get_regions(*t, "regions", "recombination");
  }

  {
    const toml::table* t = subtable(root, "dirichlet", "root");
    if (!t) throw ConfigError("missing [dirichlet]");
    check_keys(*t, {"phi_left", "phi_right", "psi_left", "psi_right", "phi", "psi"}, "dirichlet");
    const DirichletSpec phi = parse_dirichlet(*t, "phi", false);
    const DirichletSpec psi = parse_dirichlet(*t, "psi", false);
    const bool has_phi = t->get("phi") != nullptr, has_psi = t->get("psi") != nullptr;
    M.dirichlet[0] = has_phi ? phi : parse_dirichlet(*t, "phi_left", true);
    M.dirichlet[1] = has_phi ? phi : parse_dirichlet(*t, "phi_right", true);
    M.dirichlet[2] = has_psi ? psi : parse_dirichlet(*t, "psi_left", true);
    M.dirichlet[3] = has_psi ? psi : parse_dirichlet(*t, "psi_right", true);
    for (int i = 0; i < 2; ++i)
      if (M.dirichlet[i].formula != "const") throw ConfigError("quasi Fermi contact values must be constants");
    for (auto& d : M.dirichlet) d.value /= UT;
  }

  if (auto t = subtable(root, "initial", "root")) {
    check_keys(*t, {"profile", "amplitude", "phi", "phi_a", "anion_fill", "anion_density", "file", "light_soak"}, "initial");
    auto& I = cfg.initial;
    I.profile = get_string(*t, "profile", "initial", I.profile);
    if (I.profile != "sinusoidal" && I.profile != "quadratic" && I.profile != "constant" && I.profile != "from_file")
      throw ConfigError("initial.profile must be sinusoidal, quadratic, constant or from_file");
    I.amplitude = get_number(*t, "amplitude", "initial", I.profile == "quadratic" ? 1.0 : 0.5) / UT;
    I.phi = get_number(*t, "phi", "initial", 0.0) / UT;
    I.phi_a = get_number(*t, "phi_a", "initial", 0.0) / UT;
    I.light_soak = get_number(*t, "light_soak", "initial", 0.0) / time_scale;
    if (!(I.light_soak >= 0.0)) throw ConfigError("initial.light_soak must be >= 0");
    if (int(t->get("phi_a") != nullptr) + int(t->get("anion_fill") != nullptr) + int(t->get("anion_density") != nullptr) > 1)
      throw ConfigError("give only one of initial.phi_a, initial.anion_fill, initial.anion_density");
    if (t->get("anion_density")) {
      I.anion_density = get_number(*t, "anion_density", "initial", 0.5);
      if (!(*I.anion_density > 0.0 && *I.anion_density < 1.0))
        throw ConfigError("initial.anion_density must lie in (0, 1)");
    }
    if (t->get("anion_fill")) {
      I.anion_fill = get_number(*t, "anion_fill", "initial", 0.5);
      if (!(*I.anion_fill > 0.0 && *I.anion_fill < 1.0)) throw ConfigError("initial.anion_fill must lie in (0, 1)");
    }
    if (I.profile == "from_file") {
      const std::string f = get_string(*t, "file", "initial", "");
      if (f.empty()) throw ConfigError("initial.file is required for the from_file profile");
      I.file = std::filesystem::path(f).is_absolute() ? std::filesystem::path(f) : base_dir / f;
      if (!std::filesystem::exists(I.file)) throw ConfigError("initial.file '" + I.file.string() + "' does not exist");
    }
  }

  {
    const toml::table* t = subtable(root, "time", "root");
    if (!t) throw ConfigError("missing [time]");
    check_keys(*t, {"t_start", "t_end", "step", "steps"}, "time");
    cfg.time.t_start = get_number(*t, "t_start", "time", 0.0) / time_scale;
    cfg.time.t_end = require_number(*t, "t_end", "time") / time_scale;
    cfg.time.step = get_number(*t, "step", "time", 0.0) / time_scale;
    for (double s : get_numbers(*t, "steps", "time")) cfg.time.steps.push_back(s / time_scale);
    cfg.time.validate();
  }

  if (auto t = subtable(root, "solver", "root")) {
    check_keys(*t, {"abs_tol", "rel_tol", "step_tol", "max_iters", "damping_initial", "damping_growth",
                    "max_backtracks", "max_update", "noise_tol", "row_scaling"},
               "solver");
    auto& N = cfg.newton;
    N.abs_tol = get_number(*t, "abs_tol", "solver", N.abs_tol);
    N.rel_tol = get_number(*t, "rel_tol", "solver", N.rel_tol);
    N.step_tol = get_number(*t, "step_tol", "solver", N.step_tol);
    N.max_iters = get_int(*t, "max_iters", "solver", N.max_iters);
    N.damping_initial = get_number(*t, "damping_initial", "solver", N.damping_initial);
    N.damping_growth = get_number(*t, "damping_growth", "solver", N.damping_growth);
    N.max_backtracks = get_int(*t, "max_backtracks", "solver", N.max_backtracks);
    N.max_update = get_number(*t, "max_update", "solver", N.max_update);
    N.noise_tol = get_number(*t, "noise_tol", "solver", N.noise_tol);
    N.row_scaling = get_bool(*t, "row_scaling", "solver", N.row_scaling);
  }
  cfg.newton.validate();

  if (auto t = subtable(root, "output", "root")) {
    check_keys(*t, {"directory", "profile_times", "svg", "steady"}, "output");
    const std::string dir = get_string(*t, "directory", "output", "out");
    cfg.output.directory = dir;
    for (double v : get_numbers(*t, "profile_times", "output")) cfg.output.profile_times.push_back(v / time_scale);
    cfg.output.svg = get_bool(*t, "svg", "output", true);
    cfg.output.steady = get_bool(*t, "steady", "output", true);
  } else {
    cfg.output.directory = "out";
  }

  if (auto t = subtable(root, "equilibrium", "root")) {
    check_keys(*t, {"anion_mass"}, "equilibrium");
    if (t->get("anion_mass")) cfg.equilibrium_mass = get_number(*t, "anion_mass", "equilibrium", 0.0);
  }

  // catches bad statistics pairings and similar before any work is done
  instantiate(M, 2).validate();
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  RunConfig cfg = parse_config(text, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
  cfg.source = path;
  return cfg;
}

namespace {

// psi with z_n n + z_p p + C = 0 in one cell for the given quasi Fermi potential
double neutral_psi(const Scenario& sc, int cell, double phi) {
  const double C = sc.doping[cell];
  auto charge = [&](double psi) {
    return DimensionlessParams::z_n * density_n(sc, cell, phi, psi) +
           DimensionlessParams::z_p * density_p(sc, cell, phi, psi) + C;
  };
  // charge decreases in psi
  double lo = phi - 1.0, hi = phi + 1.0;
  double flo = charge(lo), fhi = charge(hi);
  for (int i = 0; flo < 0.0 && i < 200; ++i) flo = charge(lo -= 4.0 * (i + 1));
  for (int i = 0; fhi > 0.0 && i < 200; ++i) fhi = charge(hi += 4.0 * (i + 1));
  if (!(flo >= 0.0 && fhi <= 0.0)) throw ConfigError("charge_neutral: no neutral potential found at the contact");
  boost::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      charge, lo, hi, flo, fhi, [](double a, double b) { return std::abs(a - b) <= 1e-15 * (1.0 + std::abs(a)); },
      iters);
  return 0.5 * (r.first + r.second);
}

double resolve_psi(const Scenario& sc, const DirichletSpec& d, int cell) {
  if (d.formula == "const") return d.value;
  if (d.formula == "arcsinh_half_doping_plus") return std::asinh(0.5 * sc.doping[cell]) + d.value;
  if (d.formula == "charge_neutral") return neutral_psi(sc, cell, d.value);
  throw ConfigError("unknown Dirichlet formula '" + d.formula + "'");
}

}  // namespace

Scenario instantiate(const ModelSpec& spec, int nodes_per_region) {
  Scenario sc;
  sc.mesh = build_three_layer_mesh(spec.breakpoints, nodes_per_region);
  const Mesh& mesh = sc.mesh;
  sc.params = spec.params;
  sc.stat_n = Statistics(spec.stat_n);
  sc.stat_p = Statistics(spec.stat_p);
  sc.stat_a = Statistics(spec.stat_a);
  sc.coeffs = spec.coeffs;
  sc.physical = spec.physical;
  sc.recombination = spec.recombination;
  sc.recombination_regions = spec.recombination_regions;

  const int nc = mesh.num_cells();
  sc.doping.resize(nc);
  sc.generation.assign(nc, 0.0);
  const auto& G = spec.generation;
  for (int k = 0; k < nc; ++k) {
    const Cell& c = mesh.cells[k];
    const int r = static_cast<int>(c.region);
    sc.doping[k] = spec.doping[r];
    if (G.kind == "zero" || !G.regions[r]) continue;
    if (G.kind == "constant") {
      sc.generation[k] = G.value;
    } else {
      const double depth = G.from_right ? mesh.breakpoints[3] - c.center : c.center - mesh.breakpoints[0];
      sc.generation[k] = G.value * std::exp(-G.alpha * depth);
    }
  }

  // phi first: charge_neutral needs it
  sc.dirichlet.phi_left = spec.dirichlet[0].value;
  sc.dirichlet.phi_right = spec.dirichlet[1].value;
  sc.dirichlet.psi_left = sc.dirichlet.phi_left;
  sc.dirichlet.psi_right = sc.dirichlet.phi_right;
  DirichletSpec left = spec.dirichlet[2], right = spec.dirichlet[3];
  if (left.formula == "charge_neutral") left.value = sc.dirichlet.phi_left;
  if (right.formula == "charge_neutral") right.value = sc.dirichlet.phi_right;
  sc.dirichlet.psi_left = resolve_psi(sc, left, 0);
  sc.dirichlet.psi_right = resolve_psi(sc, right, nc - 1);
  return sc;
}

namespace {

struct ProfileTable {
  std::vector<double> x, phi_n, phi_p, phi_a_x, phi_a;
};

ProfileTable read_profile_csv(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot read initial profile '" + p.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("initial profile '" + p.string() + "' is empty");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    return it == header.end() ? -1 : static_cast<int>(it - header.begin());
  };
  const int ix = col("x"), in_ = col("phi_n"), ip = col("phi_p"), ia = col("phi_a");
  if (ix < 0 || in_ < 0 || ip < 0) throw ConfigError("initial profile needs columns x, phi_n, phi_p");
  ProfileTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < header.size()) cells.emplace_back();
    try {
      t.x.push_back(std::stod(cells[ix]));
      t.phi_n.push_back(std::stod(cells[in_]));
      t.phi_p.push_back(std::stod(cells[ip]));
      if (ia >= 0 && !cells[ia].empty()) {
        t.phi_a_x.push_back(t.x.back());
        t.phi_a.push_back(std::stod(cells[ia]));
      }
    } catch (const std::exception&) {
      throw ConfigError("initial profile '" + p.string() + "' has a malformed row");
    }
  }
  if (t.x.size() < 2) throw ConfigError("initial profile needs at least two rows");
  for (size_t i = 1; i < t.x.size(); ++i)
    if (!(t.x[i] >= t.x[i - 1])) throw ConfigError("initial profile x must be sorted");
  return t;
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  if (at >= x.back()) return y.back();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  const size_t i = static_cast<size_t>(it - x.begin());
  const double w = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return (1.0 - w) * y[i - 1] + w * y[i];
}

}  // namespace

State initial_state(const Scenario& sc, const InitialSpec& init, const NewtonOptions& opts) {
  const Mesh& mesh = sc.mesh;
  const int nc = mesh.num_cells();
  const double x0 = mesh.breakpoints[0], L = mesh.length();
  State st;
  st.phi_n.resize(nc);
  st.phi_p.resize(nc);
  st.psi.resize(nc);
  st.phi_a.assign(mesh.num_intrinsic(), init.phi_a);

  std::optional<ProfileTable> table;
  if (init.profile == "from_file") table = read_profile_csv(init.file);

  for (int k = 0; k < nc; ++k) {
    const double x = mesh.cells[k].center;
    const double s = x - x0;
    double phi = 0.0;
    if (init.profile == "sinusoidal") phi = sc.phiD_at(x) + init.amplitude * std::sin(M_PI * s / L);
    else if (init.profile == "quadratic") phi = sc.phiD_at(x) + init.amplitude * s * (L - s) / (L * L);
    else if (init.profile == "constant") phi = init.phi;
    if (table) {
      st.phi_n[k] = interp(table->x, table->phi_n, x);
      st.phi_p[k] = interp(table->x, table->phi_p, x);
      const int ia = mesh.intrinsic_index[k];
      if (ia >= 0 && !table->phi_a.empty()) st.phi_a[ia] = interp(table->phi_a_x, table->phi_a, x);
    } else {
      st.phi_n[k] = phi;
      st.phi_p[k] = phi;
    }
    st.psi[k] = sc.psiD_at(x);
  }
  if (init.anion_fill) {
    st = solve_poisson_with_anion_mass(sc, st, *init.anion_fill * sc.intrinsic_capacity());
  } else if (init.anion_density) {
    // the fixed anion charge goes into the doping and the mobile anions are emptied
    Scenario frozen = sc;
    const double f = *init.anion_density;
    const int za = sc.params.z_a;
    for (int k : mesh.intrinsic_cells) frozen.doping[k] += za * f * sc.coeff(k).N_a / sc.params.delta;
    State empty = st;
    empty.phi_a.assign(mesh.num_intrinsic(), -1e6);
    st.psi = solve_poisson_given_qfp(frozen, empty, st.psi);
    const double eta = sc.stat_a.inverse(f);
    for (int k : mesh.intrinsic_cells) st.phi_a[mesh.intrinsic_index[k]] = st.psi[k] - sc.coeff(k).E_a + eta / za;
  } else {
    st.psi = solve_poisson_given_qfp(sc, st, st.psi);
  }
  if (init.light_soak > 0.0) {
    State soaked = switch_on_generation(sc, st, init.light_soak, opts);
    soaked.time = st.time;
    return soaked;
  }
  return st;
}

}  // namespace psim
