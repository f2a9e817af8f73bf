#pragma once

#include "spillscm/chain.hpp"
#include "spillscm/panel.hpp"
#include "spillscm/random.hpp"
#include "spillscm/sar_sampler.hpp"
#include "spillscm/weights_sampler.hpp"

namespace spillscm {

enum class ChainMode {
  joint,               // one RNG, weights and SAR sweeps interleaved per iteration
  paired_independent,  // two separate chains on split seeds, paired by draw index
};

struct JointConfig {
  SarConfig sar;               // chain settings here apply to both blocks
  HorseshoeConfig weights;     // hyperparameters of the weights regression
  ChainMode mode = ChainMode::joint;

  const ChainConfig& chain() const { return sar.chain; }
  void validate() const { sar.validate(); }
};

struct JointPosterior {
  WeightsPosterior weights;
  SarPosterior sar;

  int draws() const { return weights.draws(); }
};

/// Runs both samplers on pretreatment data. Draw m of the weights block is
/// paired with draw m of the SAR block.
inline JointPosterior run_joint_chain(const PretreatmentData& pre, const SpatialWeights& weights,
                                      const JointConfig& config) {
  config.validate();
  const ChainConfig& chain = config.chain();
  JointPosterior out;
  if (config.mode == ChainMode::paired_independent) {
    if (config.sar.jacobian == RhoJacobian::simultaneous) {
      throw ConfigError("the simultaneous Jacobian needs joint mode");
    }
    ChainConfig wc = chain;
    wc.seed = derive_seed(chain.seed, 1);
    SarConfig sc = config.sar;
    sc.chain.seed = derive_seed(chain.seed, 2);
    out.weights = run_weights_chain(pre, wc, config.weights);
    out.sar = run_sar_chain(pre, weights, sc);
    return out;
  }

  const WeightsSampler wsampler(pre, config.weights);
  const SarSampler ssampler(pre, weights, config.sar);
  Rng rng(chain.seed);
  HorseshoeState wstate = wsampler.initial_state();
  const bool simultaneous = config.sar.jacobian == RhoJacobian::simultaneous;
  // Minimum-norm least squares weights only seed the simultaneous Jacobian.
  SarState sstate = ssampler.initial_state(
      simultaneous ? VectorXd(pre.controls.completeOrthogonalDecomposition().solve(pre.treated))
                   : VectorXd());
  WeightsRecorder wrec(chain, pre.n_controls());
  SarRecorder srec(chain, pre.n_covariates());
  for (int it = 0; it < chain.iterations; ++it) {
    wsampler.gibbs_step(wstate, rng, it);
    if (simultaneous) sstate.alpha = wstate.coef;
    const bool accepted = ssampler.sweep(sstate, rng, it);
    wrec.record(it, wstate);
    srec.record(it, sstate, accepted);
  }
  out.weights = wrec.take();
  out.sar = srec.take();
  return out;
}

inline JointPosterior run_joint_chain(const PanelData& panel, const SpatialWeights& weights,
                                      const JointConfig& config) {
  return run_joint_chain(extract_pretreatment(panel), weights, config);
}

}  // namespace spillscm
