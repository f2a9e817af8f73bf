#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "spillscm/baselines.hpp"
#include "spillscm/effects.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/io.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/pipeline.hpp"
#include "spillscm/simulate.hpp"

namespace spillscm {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitSampler = 4,
};

struct RunConfig {
  std::string subcommand;

  std::string panel_path;
  std::string weights_path;
  std::string edges_path;
  std::string trade_path;
  std::string out_dir = "spillscm_out";
  PanelSchema schema;
  int t0 = 0;
  bool normalize_weights = false;

  int draws = 5000;
  int burn_in = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  int factors = 2;
  std::optional<double> level;
  ChainMode mode = ChainMode::joint;
  RhoJacobian jacobian = RhoJacobian::spatial;

  std::string scenario_grid = "16:30:20";
  std::vector<double> rhos = standard_rho_grid();
  int replications = 100;
  double beta = 1.0;
  MethodSet methods;
  int threads = 0;

  ChainConfig chain() const {
    ChainConfig c;
    c.iterations = draws;
    c.burn_in = burn_in;
    c.thin = thin;
    c.seed = seed;
    return c;
  }

  JointConfig joint() const {
    JointConfig j;
    j.sar.chain = chain();
    j.sar.factors = factors;
    j.sar.jacobian = jacobian;
    j.mode = mode;
    return j;
  }

  double require_level() const {
    if (!level) throw ConfigError("--level is required (credibility level in (0, 1))");
    if (!(*level > 0.0 && *level < 1.0)) {
      throw ConfigError("--level must lie in (0, 1), got " + std::to_string(*level));
    }
    return *level;
  }

  void validate_sampler() const {
    if (draws <= burn_in) {
      throw ConfigError("--draws (" + std::to_string(draws) + ") must exceed --burn-in (" +
                        std::to_string(burn_in) + ")");
    }
    if (factors < 1) throw ConfigError("--factors must be at least 1");
    chain().validate();
  }

  json echo() const {
    json j{{"subcommand", subcommand},
           {"panel", panel_path},
           {"weights", weights_path},
           {"edges", edges_path},
           {"trade", trade_path},
           {"out", out_dir},
           {"t0", t0},
           {"normalize_weights", normalize_weights},
           {"draws", draws},
           {"burn_in", burn_in},
           {"thin", thin},
           {"seed", seed},
           {"factors", factors},
           {"mode", mode == ChainMode::joint ? "joint" : "paired-independent"},
           {"jacobian", jacobian == RhoJacobian::spatial ? "spatial" : "simultaneous"}};
    j["level"] = level ? json(*level) : json(nullptr);
    if (subcommand == "simulate") {
      j["scenario_grid"] = scenario_grid;
      j["rho"] = rhos;
      j["replications"] = replications;
      j["beta"] = beta;
      j["methods"] = {{"proposed", methods.proposed}, {"scm", methods.scm}, {"bscm", methods.bscm}};
    }
    return j;
  }
};

namespace detail {

namespace fs = std::filesystem;

inline std::ifstream open_input(const std::string& path, const std::string& flag) {
  if (path.empty()) throw ConfigError(flag + " is required");
  if (!fs::exists(path)) throw ConfigError(flag + ": file '" + path + "' does not exist");
  std::ifstream in(path);
  if (!in) throw ConfigError(flag + ": cannot open '" + path + "'");
  return in;
}

inline std::ifstream open_artifact(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("missing artifact '" + path.string() + "'");
  return in;
}

class Artifacts {
 public:
  explicit Artifacts(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("--out: cannot create '" + dir_.string() + "': " + ec.message());
  }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ConfigError("--out: cannot write '" + (dir_ / name).string() + "'");
    body(out);
    names_.push_back(name);
  }

  void write_json(const std::string& name, const json& j) {
    write(name, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
  }

  const fs::path& dir() const { return dir_; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

inline std::string level_tag(double level) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", level * 100.0);
  return buf;
}

inline std::vector<std::string> control_labels(const PanelData& panel) {
  return {panel.unit_labels.begin() + 1, panel.unit_labels.end()};
}

inline PanelData load_panel_file(const RunConfig& cfg) {
  if (cfg.t0 < 1) throw ConfigError("--t0 must be a positive number of pretreatment periods");
  std::ifstream in = open_input(cfg.panel_path, "--panel");
  try {
    return load_panel(in, cfg.schema, cfg.t0);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("--t0: ") + e.what());
  }
}

/// Exactly one of --weights, --edges, --trade. Edge lists and weight
/// matrices are row-normalised on request; trade shares always are.
inline SpatialWeights load_weights(const RunConfig& cfg, const PanelData& panel) {
  const int given = !cfg.weights_path.empty() + !cfg.edges_path.empty() + !cfg.trade_path.empty();
  if (given != 1) throw ConfigError("give exactly one of --weights, --edges, --trade");
  SpatialWeights s;
  if (!cfg.weights_path.empty()) {
    std::ifstream in = open_input(cfg.weights_path, "--weights");
    s = read_weights_matrix(in, panel.unit_labels);
  } else if (!cfg.edges_path.empty()) {
    std::ifstream in = open_input(cfg.edges_path, "--edges");
    s = build_adjacency_weights(read_edge_list(in, panel.unit_labels), panel.n_controls());
  } else {
    std::ifstream in = open_input(cfg.trade_path, "--trade");
    return build_trade_weights(read_trade_matrix(in, panel.unit_labels));
  }
  return cfg.normalize_weights ? row_normalize(s) : s;
}

inline json manifest(const RunConfig& cfg, const Artifacts& files, json extra = json::object()) {
  json j{{"schema", kSchema},
         {"version", kVersion},
         {"command", cfg.subcommand},
         {"seed", cfg.seed},
         {"config", cfg.echo()},
         {"artifacts", files.names()}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

inline void write_summaries(Artifacts& files, const std::string& prefix, const EffectSummary& s,
                            const PanelData& panel, const VectorXd& alpha_mean) {
  const std::string tag = level_tag(s.level);
  files.write_json(prefix + "_summary_" + tag + ".json", summary_json(s, panel));
  files.write(prefix + "_summary_" + tag + ".csv",
              [&](std::ostream& o) { write_summary_csv(o, s, panel); });
  files.write(prefix + "_plot_" + tag + ".csv",
              [&](std::ostream& o) { write_plot_bundle(o, s, panel, alpha_mean); });
}

inline int report(std::ostream& err, const char* kind, const std::exception& e, int code) {
  err << "spillscm: " << kind << ": " << e.what() << '\n';
  return code;
}

/// Runs a command body and maps exceptions to exit codes.
inline int guarded(std::ostream& err, const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const ConfigError& e) {
    return report(err, "configuration error", e, kExitConfig);
  } catch (const DataError& e) {
    return report(err, "data error", e, kExitData);
  } catch (const DivergenceError& e) {
    return report(err, "sampler diverged", e, kExitSampler);
  } catch (const SingularSystemError& e) {
    return report(err, "singular system", e, kExitSampler);
  } catch (const NumericalError& e) {
    return report(err, "numerical failure", e, kExitSampler);
  } catch (const std::exception& e) {
    return report(err, "error", e, kExitFailure);
  }
}

}  // namespace detail

/// Samples the joint posterior and writes draws, effect summaries, plot data
/// and a manifest. Copies of the panel and weights go along so `effects` can
/// rerun from the output directory alone.
inline int cmd_fit(const RunConfig& cfg, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const double level = cfg.require_level();
    cfg.validate_sampler();
    const PanelData panel = detail::load_panel_file(cfg);
    const SpatialWeights weights = detail::load_weights(cfg, panel);
    detail::Artifacts files(cfg.out_dir);

    err << "spillscm fit: " << panel.n_controls() << " controls, " << panel.n_periods()
        << " periods, t0=" << panel.t0 << ", " << cfg.draws << " sweeps\n";
    const JointPosterior post = run_joint_chain(panel, weights, cfg.joint());
    const EffectDraws draws = effect_draws(post, panel, weights);
    if (draws.excluded > 0) {
      err << "spillscm fit: excluded " << draws.excluded << " draws with a singular system\n";
    }
    const EffectSummary summary = summarize(draws, level);

    const auto controls = detail::control_labels(panel);
    files.write("panel.csv", [&](std::ostream& o) { save_panel(o, panel); });
    files.write("weights.csv",
                [&](std::ostream& o) { write_weights_matrix(o, weights, panel.unit_labels); });
    files.write("weights_posterior.csv",
                [&](std::ostream& o) { write_weights_posterior(o, post.weights, controls); });
    files.write("sar_posterior.csv",
                [&](std::ostream& o) { write_sar_posterior(o, post.sar, panel.covariate_names); });
    files.write_json("sar_diagnostics.json", sar_diagnostics_json(post.sar));
    files.write("effect_draws.csv", [&](std::ostream& o) { write_effect_draws(o, draws, panel); });
    detail::write_summaries(files, "effects", summary, panel, post.weights.posterior_mean());

    std::vector<std::string> masked;
    for (int j = 0; j < draws.n_post(); ++j)
      if (!draws.computable[j]) masked.push_back(panel.time_labels[draws.periods[j]]);
    const json extra{{"t0", panel.t0},
                     {"level", level},
                     {"draws", post.draws()},
                     {"excluded_draws", draws.excluded},
                     {"masked_periods", masked},
                     {"acceptance_rate", post.sar.acceptance_rate()}};
    files.write_json("manifest.json", detail::manifest(cfg, files, extra));
    err << "spillscm fit: rho acceptance " << post.sar.acceptance_rate() << ", wrote "
        << files.names().size() << " files to " << files.dir().string() << '\n';
  });
}

/// Recomputes effect summaries from stored draws at a new credibility level.
inline int cmd_effects(const RunConfig& cfg, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const double level = cfg.require_level();
    const std::filesystem::path dir(cfg.out_dir);
    std::ifstream man_in = detail::open_artifact(dir / "manifest.json");
    json man;
    try {
      man = json::parse(man_in);
    } catch (const json::exception& e) {
      throw DataError(std::string("manifest.json is not valid JSON: ") + e.what());
    }
    if (!man.contains("t0")) throw DataError("manifest.json lacks t0");
    const int t0 = man["t0"].get<int>();

    std::ifstream panel_in = detail::open_artifact(dir / "panel.csv");
    const PanelData panel = load_panel(panel_in, PanelSchema{}, t0);
    std::ifstream weights_in = detail::open_artifact(dir / "weights.csv");
    const SpatialWeights weights = read_weights_matrix(weights_in, panel.unit_labels);
    std::ifstream wp_in = detail::open_artifact(dir / "weights_posterior.csv");
    const WeightsPosterior wp = read_weights_posterior(wp_in);
    std::ifstream sp_in = detail::open_artifact(dir / "sar_posterior.csv");
    const SarPosterior sp = read_sar_posterior(sp_in);

    const EffectDraws draws = effect_draws(wp, sp, panel, weights);
    const EffectSummary summary = summarize(draws, level);
    detail::Artifacts files(dir);
    detail::write_summaries(files, "effects", summary, panel, wp.posterior_mean());
    err << "spillscm effects: level " << level << ", " << draws.draws() << " draws\n";
  });
}

/// Standard SCM and BSCM (rho fixed at 0) on the same panel.
inline int cmd_baseline(const RunConfig& cfg, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    const double level = cfg.require_level();
    cfg.validate_sampler();
    const PanelData panel = detail::load_panel_file(cfg);
    SpatialWeights weights;
    weights.w = VectorXd::Zero(panel.n_controls());
    weights.W = MatrixXd::Zero(panel.n_controls(), panel.n_controls());
    detail::Artifacts files(cfg.out_dir);
    const PretreatmentData pre = extract_pretreatment(panel);

    const ScmFit fit = fit_standard_scm(pre);
    if (fit.rank_deficient()) err << "spillscm baseline: warning: " << fit.warning << '\n';
    const auto controls = detail::control_labels(panel);
    files.write("scm_weights.csv", [&](std::ostream& o) {
      o << "unit,alpha_hat\n";
      for (std::size_t i = 0; i < controls.size(); ++i)
        o << csv::quote(controls[i]) << ',' << csv::format_exact(fit.alpha_hat[i]) << '\n';
    });
    const auto gaps = scm_effects(fit, panel);
    files.write("scm_effects.csv", [&](std::ostream& o) {
      o << "period,effect,status\n";
      for (std::size_t j = 0; j < gaps.size(); ++j) {
        o << csv::quote(panel.time_labels[panel.t0 + j]) << ','
          << (gaps[j] ? csv::format_exact(*gaps[j]) + ",ok" : std::string("NA,masked")) << '\n';
      }
    });

    const WeightsPosterior bscm = fit_bscm(pre, cfg.chain());
    files.write("bscm_posterior.csv",
                [&](std::ostream& o) { write_weights_posterior(o, bscm, controls); });
    const EffectSummary summary = summarize(bscm_effect_draws(bscm, panel, weights), level);
    detail::write_summaries(files, "bscm", summary, panel, bscm.posterior_mean());
    const json extra{{"t0", panel.t0},
                     {"level", level},
                     {"scm_pretreatment_rmse", fit.pretreatment_rmse},
                     {"scm_rank", fit.rank}};
    files.write_json("baseline_manifest.json", detail::manifest(cfg, files, extra));
  });
}

/// Scenarios of a simulate run: every grid cell crossed with every rho.
inline std::vector<SimScenario> simulation_scenarios(const RunConfig& cfg) {
  if (cfg.rhos.empty()) throw ConfigError("--rho needs at least one value");
  if (cfg.replications < 1) throw ConfigError("--replications must be positive");
  std::vector<SimScenario> out;
  for (const GridCell& cell : parse_scenario_grid(cfg.scenario_grid)) {
    for (double rho : cfg.rhos) {
      SimScenario sc;
      sc.n_controls = cell.n_controls;
      sc.t_total = cell.t_total;
      sc.t0 = cell.t0;
      sc.rho = rho;
      sc.beta = cfg.beta;
      sc.replications = cfg.replications;
      sc.sampler.chain = cfg.chain();
      sc.sampler.factors = cfg.factors;
      sc.sampler.jacobian = cfg.jacobian;
      sc.seed = cfg.seed;
      sc.validate();
      out.push_back(sc);
    }
  }
  return out;
}

/// Monte Carlo experiment. Data go to files only; progress goes to `err`.
inline int cmd_simulate(const RunConfig& cfg, std::ostream& err = std::cerr) {
  return detail::guarded(err, [&] {
    cfg.validate_sampler();
    const auto scenarios = simulation_scenarios(cfg);
    detail::Artifacts files(cfg.out_dir);
    std::vector<MetricsReport> reports;
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const SimScenario& sc = scenarios[s];
      err << "spillscm simulate: scenario " << s + 1 << "/" << scenarios.size()
          << " N=" << sc.n_controls << " T=" << sc.t_total << " T0=" << sc.t0
          << " rho=" << sc.rho << '\n';
      int last = -1;
      reports.push_back(run_monte_carlo(sc, cfg.methods, cfg.threads, [&](int done, int total) {
        const int pct = 100 * done / total;
        if (pct / 10 != last / 10) {
          err << "  " << done << "/" << total << " replications\n";
          last = pct;
        }
      }));
      for (const auto& msg : reports.back().failure_messages) err << "  failed " << msg << '\n';
    }
    files.write("metrics.csv", [&](std::ostream& o) { write_metrics_csv(o, reports); });
    files.write("table1_bias.csv", [&](std::ostream& o) { write_table1(o, reports, false); });
    files.write("table1_rmse.csv", [&](std::ostream& o) { write_table1(o, reports, true); });
    if (cfg.methods.proposed) {
      files.write("table2_coverage.csv", [&](std::ostream& o) { write_table2(o, reports); });
    }
    files.write_json("metrics.json", metrics_json(reports));
    files.write_json("manifest.json", detail::manifest(cfg, files));
  });
}

inline int run_command(const RunConfig& cfg, std::ostream& err = std::cerr) {
  if (cfg.subcommand == "fit") return cmd_fit(cfg, err);
  if (cfg.subcommand == "effects") return cmd_effects(cfg, err);
  if (cfg.subcommand == "baseline") return cmd_baseline(cfg, err);
  if (cfg.subcommand == "simulate") return cmd_simulate(cfg, err);
  err << "spillscm: configuration error: unknown subcommand '" << cfg.subcommand << "'\n";
  return kExitConfig;
}

}  // namespace spillscm
