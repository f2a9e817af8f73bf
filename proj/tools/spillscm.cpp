#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>

#include "spillscm/commands.hpp"

namespace {

spillscm::MethodSet parse_methods(const std::string& list) {
  spillscm::MethodSet m{false, false, false};
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = spillscm::csv::trim(item);
    if (item == "proposed") m.proposed = true;
    else if (item == "scm") m.scm = true;
    else if (item == "bscm") m.bscm = true;
    else if (!item.empty())
      throw spillscm::ConfigError("--methods: unknown method '" + item + "'");
  }
  if (!m.proposed && !m.scm && !m.bscm) throw spillscm::ConfigError("--methods is empty");
  return m;
}

}  // namespace

int main(int argc, char** argv) {
  spillscm::RunConfig cfg;
  CLI::App app{"Synthetic control estimation with spatial spillovers"};
  app.set_config("--config", "", "Flat key=value file; command-line flags override it");

  app.add_option("command", cfg.subcommand, "fit | effects | baseline | simulate")
      ->required()
      ->check(CLI::IsMember({"fit", "effects", "baseline", "simulate"}));

  app.add_option("--panel", cfg.panel_path, "Long-format panel CSV")->group("Data");
  app.add_option("--weights", cfg.weights_path, "Dense N x (N+1) spatial weights CSV")
      ->group("Data");
  app.add_option("--edges", cfg.edges_path, "Adjacency edge list (unit pairs)")->group("Data");
  app.add_option("--trade", cfg.trade_path, "(N+1) x (N+1) trade-flow matrix CSV")
      ->group("Data");
  app.add_flag("--normalize-weights", cfg.normalize_weights,
               "Row-normalise --weights or --edges input")
      ->group("Data");
  app.add_option("--t0", cfg.t0, "Number of pretreatment periods")->group("Data");
  app.add_option("--unit-col", cfg.schema.unit, "Unit column name")->capture_default_str()
      ->group("Data");
  app.add_option("--time-col", cfg.schema.time, "Time column name")->capture_default_str()
      ->group("Data");
  app.add_option("--outcome-col", cfg.schema.outcome, "Outcome column name")
      ->capture_default_str()
      ->group("Data");
  app.add_option("--treated-col", cfg.schema.treated, "Treated-flag column name")
      ->capture_default_str()
      ->group("Data");
  app.add_option("--covariates", cfg.schema.covariates,
                 "Covariate columns (default: every other column)")
      ->delimiter(',')
      ->group("Data");
  app.add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();

  app.add_option("--draws", cfg.draws, "MCMC sweeps including burn-in")->capture_default_str()
      ->group("Sampler");
  app.add_option("--burn-in", cfg.burn_in, "Burn-in sweeps")->capture_default_str()
      ->group("Sampler");
  app.add_option("--thin", cfg.thin, "Keep every k-th sweep after burn-in")
      ->capture_default_str()
      ->group("Sampler");
  app.add_option("--seed", cfg.seed, "Master seed")->capture_default_str()->group("Sampler");
  app.add_option("--factors", cfg.factors, "Number of latent factors")->capture_default_str()
      ->group("Sampler");
  double level = 0.0;
  auto* level_opt =
      app.add_option("--level", level, "Credibility level in (0, 1); required for fit, effects, "
                                       "baseline")
          ->group("Sampler");
  std::string mode = "joint";
  app.add_option("--mode", mode, "joint | paired-independent")
      ->check(CLI::IsMember({"joint", "paired-independent"}))
      ->capture_default_str()
      ->group("Sampler");

  std::string jacobian = "spatial";
  app.add_option("--jacobian", jacobian,
                 "rho conditional Jacobian: spatial |I - rho W| or simultaneous "
                 "|I - rho w alpha' - rho W| (joint mode only)")
      ->check(CLI::IsMember({"spatial", "simultaneous"}))
      ->capture_default_str()
      ->group("Sampler");

  app.add_option("--scenario-grid", cfg.scenario_grid,
                 "N:T:T0 triples, comma separated, or 'full' for N in {16,36,64} x (T,T0) in {(30,20),(60,50)} (long-running)")
      ->capture_default_str()
      ->group("Simulate");
  app.add_option("--rho", cfg.rhos, "Spatial correlations to simulate")
      ->delimiter(',')
      ->group("Simulate");
  app.add_option("--replications", cfg.replications, "Monte Carlo replications per scenario")
      ->capture_default_str()
      ->group("Simulate");
  app.add_option("--beta", cfg.beta, "Covariate coefficient")->capture_default_str()
      ->group("Simulate");
  std::string methods = "proposed,scm,bscm";
  app.add_option("--methods", methods, "Methods to compare")->capture_default_str()
      ->group("Simulate");
  app.add_option("--threads", cfg.threads, "Worker threads (default SPILLSCM_THREADS or all cores)")
      ->group("Simulate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return spillscm::kExitConfig;
  }

  if (level_opt->count() > 0) cfg.level = level;
  cfg.mode = mode == "joint" ? spillscm::ChainMode::joint : spillscm::ChainMode::paired_independent;
  cfg.jacobian = jacobian == "spatial" ? spillscm::RhoJacobian::spatial
                                       : spillscm::RhoJacobian::simultaneous;
  try {
    cfg.methods = parse_methods(methods);
  } catch (const spillscm::ConfigError& e) {
    std::cerr << "spillscm: configuration error: " << e.what() << '\n';
    return spillscm::kExitConfig;
  }
  return spillscm::run_command(cfg, std::cerr);
}
