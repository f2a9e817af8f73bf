#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "spillscm/errors.hpp"
#include "spillscm/identify.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/pipeline.hpp"

namespace spillscm {

/// Per-draw effects over the post-treatment span. Periods with any missing
/// outcome are not computable; their columns hold NaN.
struct EffectDraws {
  std::vector<int> periods;      // absolute period index of each post period
  std::vector<bool> computable;  // per post period
  MatrixXd treatment;            // draws x P
  std::vector<MatrixXd> spillover;  // P blocks of draws x N
  VectorXd observed_treated;     // P
  MatrixXd observed_controls;    // P x N
  std::vector<int> kept;         // posterior draw index behind each row
  int excluded = 0;              // draws dropped for a singular system

  int draws() const { return static_cast<int>(treatment.rows()); }
  int n_post() const { return static_cast<int>(periods.size()); }
  int n_controls() const { return static_cast<int>(observed_controls.cols()); }
};

/// Treatment and spillover draws from paired (alpha^(m), rho^(m)) draws.
inline EffectDraws effect_draws(const MatrixXd& alpha, const VectorXd& rho,
                                const PanelData& panel, const SpatialWeights& weights) {
  if (alpha.rows() != rho.size()) {
    throw DataError("weights and rho posteriors have different draw counts (" +
                    std::to_string(alpha.rows()) + " vs " + std::to_string(rho.size()) + ")");
  }
  const int n = panel.n_controls();
  if (alpha.cols() != n || weights.n_controls() != n) {
    throw DataError("posterior, panel and weights disagree on the number of controls");
  }
  EffectDraws out;
  const int p = panel.n_post();
  out.observed_treated.resize(p);
  out.observed_controls.resize(p, n);
  for (int j = 0; j < p; ++j) {
    const int t = panel.t0 + j;
    out.periods.push_back(t);
    out.computable.push_back(panel.period_complete(t));
    out.observed_treated[j] = panel.treated(t);
    out.observed_controls.row(j) = panel.controls(t).transpose();
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  std::vector<VectorXd> treat_rows;
  std::vector<std::vector<VectorXd>> spill_rows;
  for (Eigen::Index m = 0; m < alpha.rows(); ++m) {
    const IdentificationSolver solver({alpha.row(m).transpose(), rho[m]}, weights);
    if (!solver.invertible()) {
      ++out.excluded;
      continue;
    }
    VectorXd tr = VectorXd::Constant(p, nan);
    std::vector<VectorXd> sp(p, VectorXd::Constant(n, nan));
    for (int j = 0; j < p; ++j) {
      if (!out.computable[j]) continue;
      const VectorXd yc = out.observed_controls.row(j).transpose();
      const double y0 = out.observed_treated[j];
      const VectorXd cf = solver.counterfactual_controls(yc, y0);
      tr[j] = y0 - alpha.row(m).dot(cf);
      sp[j] = yc - cf;
    }
    treat_rows.push_back(std::move(tr));
    spill_rows.push_back(std::move(sp));
    out.kept.push_back(static_cast<int>(m));
  }

  const int kept = static_cast<int>(treat_rows.size());
  out.treatment.resize(kept, p);
  out.spillover.assign(p, MatrixXd(kept, n));
  for (int m = 0; m < kept; ++m) {
    out.treatment.row(m) = treat_rows[m].transpose();
    for (int j = 0; j < p; ++j) out.spillover[j].row(m) = spill_rows[m][j].transpose();
  }
  return out;
}

inline EffectDraws effect_draws(const WeightsPosterior& alpha, const SarPosterior& rho,
                                const PanelData& panel, const SpatialWeights& weights) {
  return effect_draws(alpha.alpha, rho.rho, panel, weights);
}

inline EffectDraws effect_draws(const JointPosterior& posterior, const PanelData& panel,
                                const SpatialWeights& weights) {
  return effect_draws(posterior.weights, posterior.sar, panel, weights);
}

/// Type-7 sample quantile: linear interpolation between order statistics at
/// h = (n - 1) p. `sorted` must be ascending.
inline double sorted_quantile(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw DataError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct Interval {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  bool contains(double x) const { return lower <= x && x <= upper; }
};

/// Posterior mean with equal-tailed interval at `level`.
template <typename Vec>
Interval summarize_sample(const Vec& values, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credibility level must lie in (0, 1)");
  const auto n = values.size();
  if (n < 2) throw DataError("at least two draws are needed for credible intervals");
  std::vector<double> sorted(n);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    sorted[i] = values[i];
    sum += values[i];
  }
  std::sort(sorted.begin(), sorted.end());
  const double tail = 0.5 * (1.0 - level);
  return {sum / static_cast<double>(n), sorted_quantile(sorted, tail),
          sorted_quantile(sorted, 1.0 - tail)};
}

struct EffectSummary {
  double level = 0.95;
  int draws = 0;
  int excluded = 0;
  std::vector<int> periods;
  std::vector<std::optional<Interval>> treatment;               // P
  std::vector<std::vector<std::optional<Interval>>> spillover;  // P x N
  VectorXd cumulative_loss_pct;  // unit 0 is treated, then controls

  int n_post() const { return static_cast<int>(periods.size()); }
};

/// 100 * sum_t xi_it / Yhat_it(0) per draw, with Yhat(0) = Y - xi, averaged
/// over draws. Periods that are not computable are skipped.
inline VectorXd cumulative_loss_pct(const EffectDraws& d) {
  const int n = d.n_controls();
  VectorXd total = VectorXd::Zero(n + 1);
  if (d.draws() == 0) return total;
  for (int m = 0; m < d.draws(); ++m) {
    for (int j = 0; j < d.n_post(); ++j) {
      if (!d.computable[j]) continue;
      const double xi0 = d.treatment(m, j);
      total[0] += xi0 / (d.observed_treated[j] - xi0);
      for (int i = 0; i < n; ++i) {
        const double xi = d.spillover[j](m, i);
        total[i + 1] += xi / (d.observed_controls(j, i) - xi);
      }
    }
  }
  return 100.0 * total / static_cast<double>(d.draws());
}

inline EffectSummary summarize(const EffectDraws& d, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("credibility level must lie in (0, 1)");
  if (d.draws() < 2) throw DataError("at least two usable draws are needed to summarize effects");
  EffectSummary s;
  s.level = level;
  s.draws = d.draws();
  s.excluded = d.excluded;
  s.periods = d.periods;
  const int n = d.n_controls();
  s.treatment.resize(d.n_post());
  s.spillover.assign(d.n_post(), std::vector<std::optional<Interval>>(n));
  for (int j = 0; j < d.n_post(); ++j) {
    if (!d.computable[j]) continue;
    s.treatment[j] = summarize_sample(d.treatment.col(j), level);
    for (int i = 0; i < n; ++i) s.spillover[j][i] = summarize_sample(d.spillover[j].col(i), level);
  }
  s.cumulative_loss_pct = cumulative_loss_pct(d);
  return s;
}

}  // namespace spillscm
