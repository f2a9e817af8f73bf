#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "spillscm/effects.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/weights_sampler.hpp"

namespace spillscm {

struct ScmFit {
  VectorXd alpha_hat;
  double pretreatment_rmse = 0.0;
  Eigen::Index rank = 0;
  std::string warning;  // nonempty for rank-deficient designs

  bool rank_deficient() const { return !warning.empty(); }
};

/// Unconstrained least squares of the treated unit's pretreatment outcomes on
/// the controls'. Rank-deficient designs get the minimum-norm solution.
inline ScmFit fit_standard_scm(const PretreatmentData& pre) {
  if (pre.t0() == 0) throw DataError("standard SCM: empty pretreatment window");
  if (!pre.controls.allFinite() || !pre.treated.allFinite()) {
    throw DataError("standard SCM: pretreatment outcomes must be complete");
  }
  const Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(pre.controls);
  ScmFit fit;
  fit.alpha_hat = cod.solve(pre.treated);
  fit.rank = cod.rank();
  if (fit.rank < pre.controls.cols()) {
    fit.warning = "pretreatment design has rank " + std::to_string(fit.rank) + " < " +
                  std::to_string(pre.controls.cols()) + " controls; using the minimum-norm solution";
  }
  const VectorXd resid = pre.treated - pre.controls * fit.alpha_hat;
  fit.pretreatment_rmse = std::sqrt(resid.squaredNorm() / static_cast<double>(resid.size()));
  return fit;
}

inline ScmFit fit_standard_scm(const PanelData& panel) {
  return fit_standard_scm(extract_pretreatment(panel));
}

/// Y_0t - alpha_hat' Y_t^c for every post period; empty where not computable.
inline std::vector<std::optional<double>> scm_effects(const ScmFit& fit, const PanelData& panel) {
  if (fit.alpha_hat.size() != panel.n_controls()) {
    throw DataError("SCM weights do not match the panel's controls");
  }
  std::vector<std::optional<double>> out;
  for (int t = panel.t0; t < panel.n_periods(); ++t) {
    if (!panel.period_complete(t)) {
      out.emplace_back();
      continue;
    }
    out.emplace_back(panel.treated(t) - fit.alpha_hat.dot(panel.controls(t)));
  }
  return out;
}

/// Bayesian SCM without spillovers: the horseshoe weights chain alone.
inline WeightsPosterior fit_bscm(const PretreatmentData& pre, const ChainConfig& config,
                                 const HorseshoeConfig& horseshoe = {}) {
  return run_weights_chain(pre, config, horseshoe);
}

/// BSCM effect draws: the identification map with rho fixed at 0.
inline EffectDraws bscm_effect_draws(const MatrixXd& alpha, const PanelData& panel,
                                     const SpatialWeights& weights) {
  return effect_draws(alpha, VectorXd::Zero(alpha.rows()), panel, weights);
}

inline EffectDraws bscm_effect_draws(const WeightsPosterior& posterior, const PanelData& panel,
                                     const SpatialWeights& weights) {
  return bscm_effect_draws(posterior.alpha, panel, weights);
}

}  // namespace spillscm
