#include <iostream>

#include "spillscm/spillscm.hpp"

// Simulates one panel with spillovers, fits the joint posterior and prints
// the treatment effect next to the truth and the naive SCM gap.
int main() {
  using namespace spillscm;

  SimScenario sc;
  sc.rho = -0.3;
  sc.t_total = 30;
  sc.t0 = 20;
  Rng rng(42);
  const SimDraw d = dgp_draw(sc, rng);

  JointConfig cfg;
  cfg.sar.chain.iterations = 2000;
  cfg.sar.chain.burn_in = 500;
  cfg.sar.chain.seed = 7;
  const JointPosterior post = run_joint_chain(d.panel, d.weights, cfg);
  const EffectSummary s = summarize(effect_draws(post, d.panel, d.weights), 0.95);
  const ScmFit scm = fit_standard_scm(d.panel);
  const auto gaps = scm_effects(scm, d.panel);

  std::cout << "rho posterior mean " << post.sar.rho.mean() << " (acceptance "
            << post.sar.acceptance_rate() << ")\n";
  std::cout << "period  truth   proposed  [95% interval]      scm\n";
  for (int j = 0; j < s.n_post(); ++j) {
    const Interval& iv = *s.treatment[j];
    std::cout << d.panel.time_labels[s.periods[j]] << "  " << d.true_treatment[j] << "  "
              << iv.mean << "  [" << iv.lower << ", " << iv.upper << "]  " << *gaps[j] << '\n';
  }
}
