#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "spillscm/chain.hpp"
#include "spillscm/errors.hpp"
#include "spillscm/horseshoe.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/random.hpp"

namespace spillscm {

/// Posterior draws of the synthetic weights.
struct WeightsPosterior {
  MatrixXd alpha;      // draws x N
  VectorXd sigma1_sq;  // draws
  ChainConfig meta;

  int draws() const { return static_cast<int>(alpha.rows()); }
  VectorXd posterior_mean() const { return alpha.colwise().mean().transpose(); }
};

inline constexpr double kWeightsDivergenceBound = 1e6;

/// Horseshoe regression of the treated unit's pretreatment outcomes on the
/// controls' outcomes, without intercept. Weights are unconstrained reals.
class WeightsSampler {
 public:
  WeightsSampler(const MatrixXd& controls, const VectorXd& treated, HorseshoeConfig config = {})
      : design_(controls), response_(treated), config_(config) {
    if (controls.rows() != treated.size()) {
      throw DataError("weights regression: design and response lengths differ");
    }
    if (controls.rows() == 0) throw DataError("weights regression: empty pretreatment window");
    if (!controls.allFinite() || !treated.allFinite()) {
      throw DataError("weights regression: pretreatment data must be complete");
    }
    gram_ = design_.transpose() * design_;
    cross_ = design_.transpose() * response_;
  }

  explicit WeightsSampler(const PretreatmentData& pre, HorseshoeConfig config = {})
      : WeightsSampler(pre.controls, pre.treated, config) {}

  HorseshoeState initial_state() const {
    return HorseshoeState::initial(design_.cols(), sample_variance(response_));
  }

  GaussianConditional coef_conditional(const HorseshoeState& state) const {
    return coefficient_conditional_from_moments(gram_, cross_, state);
  }

  /// One sweep in order: alpha, lambda^2, nu_lambda, tau^2, nu_tau, sigma1^2,
  /// nu_sigma1.
  void gibbs_step(HorseshoeState& state, Rng& rng, long iteration = 0) const {
    state.coef = sample_coefficients_from_moments(gram_, cross_, state, rng);
    state.local_scale_sq = sample_local_scales(state, rng, config_);
    sample_global_and_aux(state, rng, config_);
    const VectorXd residuals = response_ - design_ * state.coef;
    sample_noise_variance(residuals, state, rng, config_);
    check(state, iteration);
  }

  const MatrixXd& design() const { return design_; }
  const VectorXd& response() const { return response_; }

 private:
  static void check(const HorseshoeState& state, long iteration) {
    const bool finite = state.coef.allFinite() && state.local_scale_sq.allFinite() &&
                        std::isfinite(state.noise_var) && std::isfinite(state.global_scale_sq);
    if (!finite) {
      std::ostringstream msg;
      msg << "weights sampler produced a non-finite state: alpha=["
          << state.coef.transpose() << "] sigma1^2=" << state.noise_var
          << " tau^2=" << state.global_scale_sq;
      throw DivergenceError(msg.str(), iteration);
    }
    if (state.coef.size() > 0 && state.coef.cwiseAbs().maxCoeff() > kWeightsDivergenceBound) {
      throw DivergenceError("weights sampler diverged: |alpha| exceeds 1e6", iteration);
    }
  }

  MatrixXd design_;
  VectorXd response_;
  MatrixXd gram_;
  VectorXd cross_;
  HorseshoeConfig config_;
};

inline HorseshoeState gibbs_step(HorseshoeState state, const PretreatmentData& pre, Rng& rng) {
  WeightsSampler(pre).gibbs_step(state, rng);
  return state;
}

/// Collects draws from a running chain.
class WeightsRecorder {
 public:
  WeightsRecorder(const ChainConfig& config, Eigen::Index n_controls) {
    posterior_.meta = config;
    posterior_.alpha.resize(config.stored_draws(), n_controls);
    posterior_.sigma1_sq.resize(config.stored_draws());
  }

  void record(int iteration, const HorseshoeState& state) {
    if (!posterior_.meta.stores(iteration)) return;
    const int slot = posterior_.meta.slot(iteration);
    posterior_.alpha.row(slot) = state.coef.transpose();
    posterior_.sigma1_sq[slot] = state.noise_var;
  }

  WeightsPosterior take() { return std::move(posterior_); }

 private:
  WeightsPosterior posterior_;
};

inline WeightsPosterior run_weights_chain(const PretreatmentData& pre, const ChainConfig& config,
                                          const HorseshoeConfig& horseshoe = {}) {
  config.validate();
  const WeightsSampler sampler(pre, horseshoe);
  Rng rng(config.seed);
  HorseshoeState state = sampler.initial_state();
  WeightsRecorder recorder(config, pre.n_controls());
  for (int it = 0; it < config.iterations; ++it) {
    sampler.gibbs_step(state, rng, it);
    recorder.record(it, state);
  }
  return recorder.take();
}

}  // namespace spillscm
