#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <limits>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "spillscm/baselines.hpp"
#include "spillscm/effects.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/identify.hpp"
#include "spillscm/linalg.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/pipeline.hpp"
#include "spillscm/random.hpp"

namespace spillscm {

/// Rook adjacency on an r x r board, cells numbered row-major.
inline MatrixXd rook_matrix(int side) {
  if (side < 2) throw ConfigError("rook board side must be at least 2");
  const int n = side * side;
  MatrixXd w = MatrixXd::Zero(n, n);
  for (int row = 0; row < side; ++row) {
    for (int col = 0; col < side; ++col) {
      const int i = row * side + col;
      if (col + 1 < side) w(i, i + 1) = w(i + 1, i) = 1.0;
      if (row + 1 < side) w(i, i + side) = w(i + side, i) = 1.0;
    }
  }
  return w;
}

/// Planted synthetic weights: 0.5, -0.2, 0.4, 0.4, six entries of 0.1/6, then zeros.
inline VectorXd planted_alpha(int n) {
  if (n < 10) throw ConfigError("planted weights need at least 10 controls");
  VectorXd a = VectorXd::Zero(n);
  a[0] = 0.5;
  a[1] = -0.2;
  a[2] = 0.4;
  a[3] = 0.4;
  for (int i = 4; i < 10; ++i) a[i] = 0.1 / 6.0;
  return a;
}

inline std::vector<double> standard_rho_grid() { return {-0.8, -0.3, -0.1, 0.0, 0.1, 0.3, 0.8}; }

struct SimScenario {
  int n_controls = 16;
  int t_total = 30;
  int t0 = 20;
  double rho = 0.0;
  double beta = 1.0;
  int replications = 100;
  SarConfig sampler;
  std::uint64_t seed = 1;

  int side() const { return static_cast<int>(std::lround(std::sqrt(n_controls))); }

  void validate() const {
    if (n_controls < 10 || side() * side() != n_controls) {
      throw ConfigError("n_controls must be a perfect square of at least 16 (got " +
                        std::to_string(n_controls) + ")");
    }
    if (t0 < 1 || t0 >= t_total) throw ConfigError("simulation needs 1 <= t0 < t_total");
    if (replications < 1) throw ConfigError("replications must be positive");
    sampler.validate();
  }
};

struct SimDraw {
  PanelData panel;
  SpatialWeights weights;
  StructuralParams planted;
  VectorXd true_treatment;   // P
  MatrixXd true_spillover;   // P x N
};

/// Raw (unnormalised) simulation weights: rook W, w = 1 on the first four controls.
inline SpatialWeights simulation_weights(int n_controls) {
  const int side = static_cast<int>(std::lround(std::sqrt(n_controls)));
  SpatialWeights s;
  s.W = rook_matrix(side);
  s.w = VectorXd::Zero(n_controls);
  s.w.head(std::min(4, n_controls)).setOnes();
  return s;
}

/// One panel from the simultaneous SAR system with a single treated unit.
/// Per period the draws are X_t, then u_t, then (post-treatment) tau_t.
inline SimDraw dgp_draw(const SimScenario& sc, Rng& rng) {
  const int n = sc.n_controls;
  const int t_total = sc.t_total;
  SimDraw d;
  d.weights = simulation_weights(n);
  d.planted = {planted_alpha(n), sc.rho};

  const MatrixXd full = identification_matrix(d.planted, d.weights);
  const Eigen::PartialPivLU<MatrixXd> full_lu(full);
  const double rcond = reciprocal_condition(full_lu);
  if (!(rcond > kDefaultInvertibilityThreshold)) {
    throw SingularSystemError("simulation system I - rho w alpha' - rho W is singular",
                              rcond > 0.0 ? 1.0 / rcond : std::numeric_limits<double>::infinity());
  }
  MatrixXd spatial = -sc.rho * d.weights.W;
  spatial.diagonal().array() += 1.0;
  const Eigen::PartialPivLU<MatrixXd> spatial_lu(spatial);
  if (!(reciprocal_condition(spatial_lu) > kDefaultInvertibilityThreshold)) {
    throw SingularSystemError("simulation system I - rho W is singular",
                              std::numeric_limits<double>::infinity());
  }

  PanelData& p = d.panel;
  p.t0 = sc.t0;
  p.outcomes.resize(n + 1, t_total);
  p.missing = BoolMatrix::Constant(n + 1, t_total, false);
  p.covariates.assign(t_total, MatrixXd(n, 1));
  p.unit_labels.push_back("treated");
  for (int i = 1; i <= n; ++i) p.unit_labels.push_back("c" + std::to_string(i));
  for (int t = 1; t <= t_total; ++t) p.time_labels.push_back(std::to_string(t));
  p.covariate_names = {"x"};

  const int post = t_total - sc.t0;
  d.true_treatment.resize(post);
  d.true_spillover.resize(post, n);
  VectorXd x(n), u(n);
  for (int t = 0; t < t_total; ++t) {
    for (int i = 0; i < n; ++i) x[i] = standard_normal(rng);
    for (int i = 0; i < n; ++i) u[i] = standard_normal(rng);
    const VectorXd shock = sc.beta * x + u;
    const VectorXd yc0 = full_lu.solve(shock);
    const double y00 = d.planted.alpha.dot(yc0);
    p.covariates[t].col(0) = x;
    if (t < sc.t0) {
      p.outcomes(0, t) = y00;
      p.outcomes.col(t).tail(n) = yc0;
      continue;
    }
    const double tau = 1.0 + standard_normal(rng);
    const double y01 = y00 + tau;
    const VectorXd yc1 = spatial_lu.solve(sc.rho * d.weights.w * y01 + shock);
    p.outcomes(0, t) = y01;
    p.outcomes.col(t).tail(n) = yc1;
    d.true_treatment[t - sc.t0] = tau;
    d.true_spillover.row(t - sc.t0) = (yc1 - yc0).transpose();
  }
  p.validate();
  return d;
}

struct MethodSet {
  bool proposed = true;
  bool scm = true;
  bool bscm = true;
};

/// Errors xi - xihat averaged over post periods for one replication.
struct MethodErrors {
  double mean_error = 0.0;
  double mean_sq_error = 0.0;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string failure;
  MethodErrors proposed, scm, bscm;
  int covered = 0;      // post periods whose 95% interval holds the truth
  int cells = 0;
  double acceptance = 0.0;
  double rho_mean = 0.0;
};

struct MethodMetrics {
  std::string method;
  double bias = 0.0;
  double rmse = 0.0;
  double bias_se = 0.0;  // Monte Carlo standard errors
  double rmse_se = 0.0;
};

struct MetricsReport {
  SimScenario scenario;
  std::vector<MethodMetrics> methods;
  bool has_coverage = false;
  double coverage = 0.0;
  double coverage_se = 0.0;
  long coverage_cells = 0;
  int replications = 0;  // successful
  int failures = 0;
  std::vector<std::string> failure_messages;
  double mean_acceptance = 0.0;
  double mean_rho = 0.0;
  double runtime_seconds = 0.0;
  std::vector<ReplicationOutcome> outcomes;

  const MethodMetrics* find(const std::string& method) const {
    for (const auto& m : methods)
      if (m.method == method) return &m;
    return nullptr;
  }
};

inline constexpr double kCoverageLevel = 0.95;

namespace detail {

inline MethodErrors errors_against(const VectorXd& truth, const std::vector<double>& estimate,
                                   const std::vector<bool>& computable) {
  MethodErrors e;
  int count = 0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    if (!computable[j]) continue;
    const double err = truth[j] - estimate[j];
    e.mean_error += err;
    e.mean_sq_error += err * err;
    ++count;
  }
  if (count > 0) {
    e.mean_error /= count;
    e.mean_sq_error /= count;
  }
  return e;
}

inline std::vector<double> posterior_mean_path(const EffectDraws& d) {
  std::vector<double> out(d.n_post(), 0.0);
  for (int j = 0; j < d.n_post(); ++j)
    if (d.computable[j]) out[j] = d.treatment.col(j).mean();
  return out;
}

inline MethodMetrics aggregate(const std::string& name, const std::vector<MethodErrors>& errs) {
  MethodMetrics m;
  m.method = name;
  const double r = static_cast<double>(errs.size());
  if (errs.empty()) return m;
  double sum = 0.0, sum_sq = 0.0, mse = 0.0, mse_sq = 0.0;
  for (const auto& e : errs) {
    sum += e.mean_error;
    sum_sq += e.mean_error * e.mean_error;
    mse += e.mean_sq_error;
    mse_sq += e.mean_sq_error * e.mean_sq_error;
  }
  m.bias = sum / r;
  const double mean_mse = mse / r;
  m.rmse = std::sqrt(mean_mse);
  if (errs.size() > 1) {
    const double var_bias = std::max(0.0, (sum_sq - r * m.bias * m.bias) / (r - 1.0));
    const double var_mse = std::max(0.0, (mse_sq - r * mean_mse * mean_mse) / (r - 1.0));
    m.bias_se = std::sqrt(var_bias / r);
    m.rmse_se = m.rmse > 0.0 ? std::sqrt(var_mse / r) / (2.0 * m.rmse) : 0.0;
  }
  return m;
}

}  // namespace detail

/// Seed of replication r: SplitMix64 mix of the master seed and r. The
/// replication's panel uses stream 0 of that seed and its chain stream 1.
inline std::uint64_t replication_seed(std::uint64_t master, int r) {
  return derive_seed(master, static_cast<std::uint64_t>(r));
}

inline ReplicationOutcome run_replication(const SimScenario& sc, const MethodSet& methods, int r) {
  ReplicationOutcome out;
  try {
    const std::uint64_t seed = replication_seed(sc.seed, r);
    Rng rng(derive_seed(seed, 0));
    const SimDraw d = dgp_draw(sc, rng);
    const PretreatmentData pre = extract_pretreatment(d.panel);
    const std::vector<bool> computable(d.true_treatment.size(), true);

    if (methods.scm) {
      const ScmFit fit = fit_standard_scm(pre);
      std::vector<double> est;
      for (const auto& e : scm_effects(fit, d.panel)) est.push_back(e.value_or(0.0));
      out.scm = detail::errors_against(d.true_treatment, est, computable);
    }
    if (methods.proposed) {
      JointConfig jc;
      jc.sar = sc.sampler;
      jc.sar.chain.seed = derive_seed(seed, 1);
      const JointPosterior post = run_joint_chain(pre, d.weights, jc);
      const EffectDraws draws = effect_draws(post, d.panel, d.weights);
      if (draws.draws() < 2) throw NumericalError("too few invertible posterior draws");
      out.proposed = detail::errors_against(d.true_treatment, detail::posterior_mean_path(draws),
                                            computable);
      const EffectSummary s = summarize(draws, kCoverageLevel);
      for (int j = 0; j < s.n_post(); ++j) {
        ++out.cells;
        if (s.treatment[j]->contains(d.true_treatment[j])) ++out.covered;
      }
      out.acceptance = post.sar.acceptance_rate();
      out.rho_mean = post.sar.rho.mean();
      if (methods.bscm) {
        // The weights block of the joint chain is the BSCM posterior: its
        // conditionals never involve the SAR parameters.
        const EffectDraws b = bscm_effect_draws(post.weights, d.panel, d.weights);
        out.bscm = detail::errors_against(d.true_treatment, detail::posterior_mean_path(b),
                                          computable);
      }
    } else if (methods.bscm) {
      ChainConfig cc = sc.sampler.chain;
      cc.seed = derive_seed(seed, 1);
      const WeightsPosterior wp = fit_bscm(pre, cc, sc.sampler.horseshoe);
      const EffectDraws b = bscm_effect_draws(wp, d.panel, d.weights);
      out.bscm =
          detail::errors_against(d.true_treatment, detail::posterior_mean_path(b), computable);
    }
    out.ok = true;
  } catch (const Error& e) {
    out.ok = false;
    out.failure = "replication " + std::to_string(r) + ": " + e.what();
  }
  return out;
}

/// Worker count from SPILLSCM_THREADS, else the hardware concurrency.
inline int worker_count() {
  if (const char* env = std::getenv("SPILLSCM_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

using ProgressCallback = std::function<void(int done, int total)>;

/// Runs every replication of a scenario across a worker pool. Outcomes are
/// stored by replication index, so the report does not depend on scheduling.
inline MetricsReport run_monte_carlo(const SimScenario& sc, const MethodSet& methods = {},
                                     int threads = 0, const ProgressCallback& progress = {}) {
  sc.validate();
  const auto start = std::chrono::steady_clock::now();
  const int reps = sc.replications;
  std::vector<ReplicationOutcome> outcomes(reps);
  const int workers = std::max(1, std::min(threads > 0 ? threads : worker_count(), reps));
  std::atomic<int> next{0};
  std::atomic<int> done{0};
  std::mutex progress_mutex;
  auto work = [&]() {
    for (int r = next++; r < reps; r = next++) {
      outcomes[r] = run_replication(sc, methods, r);
      const int finished = ++done;
      if (progress) {
        const std::lock_guard<std::mutex> lock(progress_mutex);
        progress(finished, reps);
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  MetricsReport rep;
  rep.scenario = sc;
  std::vector<MethodErrors> prop, scm, bscm;
  double acceptance = 0.0, rho = 0.0;
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++rep.failures;
      rep.failure_messages.push_back(o.failure);
      continue;
    }
    ++rep.replications;
    prop.push_back(o.proposed);
    scm.push_back(o.scm);
    bscm.push_back(o.bscm);
    rep.coverage_cells += o.cells;
    rep.coverage += o.covered;
    acceptance += o.acceptance;
    rho += o.rho_mean;
  }
  if (methods.proposed) rep.methods.push_back(detail::aggregate("proposed", prop));
  if (methods.scm) rep.methods.push_back(detail::aggregate("scm", scm));
  if (methods.bscm) rep.methods.push_back(detail::aggregate("bscm", bscm));
  rep.has_coverage = methods.proposed && rep.coverage_cells > 0;
  if (rep.has_coverage) {
    rep.coverage /= static_cast<double>(rep.coverage_cells);
    rep.coverage_se =
        std::sqrt(rep.coverage * (1.0 - rep.coverage) / static_cast<double>(rep.coverage_cells));
  } else {
    rep.coverage = 0.0;
  }
  if (rep.replications > 0 && methods.proposed) {
    rep.mean_acceptance = acceptance / rep.replications;
    rep.mean_rho = rho / rep.replications;
  }
  rep.outcomes = std::move(outcomes);
  rep.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

/// (n_controls, t_total, t0) cells of a scenario grid.
struct GridCell {
  int n_controls;
  int t_total;
  int t0;
};

inline std::vector<GridCell> full_grid_cells() {
  std::vector<GridCell> cells;
  for (int n : {16, 36, 64})
    for (auto [tt, t0] : {std::pair{30, 20}, std::pair{60, 50}}) cells.push_back({n, tt, t0});
  return cells;
}

/// "full" for every N x (T, T0) combination, else comma-separated N:T:T0 triples such as
/// "16:30:20,36:60:50".
inline std::vector<GridCell> parse_scenario_grid(const std::string& spec) {
  if (spec == "full") return full_grid_cells();
  std::vector<GridCell> cells;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = std::min(spec.find(',', pos), spec.size());
    const std::string item = csv::trim(spec.substr(pos, comma - pos));
    if (!item.empty()) {
      GridCell c{};
      char sep1 = 0, sep2 = 0;
      std::istringstream is(item);
      if (!(is >> c.n_controls >> sep1 >> c.t_total >> sep2 >> c.t0) || sep1 != ':' ||
          sep2 != ':' || !is.eof()) {
        throw ConfigError("--scenario-grid entry '" + item + "' is not N:T:T0 or 'full'");
      }
      cells.push_back(c);
    }
    pos = comma + 1;
  }
  if (cells.empty()) throw ConfigError("--scenario-grid is empty");
  return cells;
}

}  // namespace spillscm
