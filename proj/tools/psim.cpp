#include <iostream>

#include <CLI11.hpp>

#include "psim/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"psim: drift-diffusion simulator for three-layer perovskite cells"};
  app.require_subcommand(1);

  std::string out_dir;
  psim::GlobalOptions g;
  app.add_option("--out-dir", out_dir, "output directory (overrides [output].directory)");
  app.add_flag("--quiet", g.quiet, "no progress messages");
  app.add_option("--threads", g.threads, "worker threads for the convergence study")->check(CLI::PositiveNumber);

  std::string config;
  int nmin = 2, nmax = 8, nref = 9;
  auto* run = app.add_subcommand("run", "transient run with diagnostics");
  run->add_option("config", config, "scenario TOML")->required();
  auto* conv = app.add_subcommand("convergence", "spatial convergence study");
  conv->add_option("config", config, "scenario TOML")->required();
  conv->add_option("--min", nmin, "coarsest level n*");
  conv->add_option("--max", nmax, "finest level n*");
  conv->add_option("--ref", nref, "reference level n*");
  auto* eq = app.add_subcommand("equilibrium", "thermodynamic equilibrium");
  eq->add_option("config", config, "scenario TOML")->required();
  auto* st = app.add_subcommand("steady", "steady state");
  st->add_option("config", config, "scenario TOML")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : psim::kExitConfig;
  }
  if (!out_dir.empty()) g.out_dir = out_dir;

  if (*run) return psim::cmd_run(config, g);
  if (*conv) return psim::cmd_convergence(config, nmin, nmax, nref, g);
  if (*eq) return psim::cmd_equilibrium(config, g);
  return psim::cmd_steady(config, g);
}
