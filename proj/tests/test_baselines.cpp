#include <gtest/gtest.h>

#include "spillscm/baselines.hpp"
#include "spillscm/simulate.hpp"

using namespace spillscm;

namespace {

PretreatmentData random_pre(int t0, int n, std::uint64_t seed) {
  Rng rng(seed);
  PretreatmentData pre;
  pre.controls.resize(t0, n);
  pre.treated.resize(t0);
  for (int t = 0; t < t0; ++t) {
    for (int i = 0; i < n; ++i) pre.controls(t, i) = standard_normal(rng);
    pre.treated[t] = standard_normal(rng);
  }
  return pre;
}

}  // namespace

TEST(StandardScm, ExactFit) {
  PretreatmentData pre = random_pre(6, 2, 1);
  pre.treated = 0.5 * pre.controls.col(0) + 0.5 * pre.controls.col(1);
  const ScmFit fit = fit_standard_scm(pre);
  EXPECT_NEAR(fit.alpha_hat[0], 0.5, 1e-12);
  EXPECT_NEAR(fit.alpha_hat[1], 0.5, 1e-12);
  EXPECT_LT(fit.pretreatment_rmse, 1e-12);
  EXPECT_FALSE(fit.rank_deficient());
}

TEST(StandardScm, SingleControlOls) {
  const PretreatmentData pre = random_pre(9, 1, 2);
  const double oracle = pre.controls.col(0).dot(pre.treated) / pre.controls.col(0).squaredNorm();
  EXPECT_NEAR(fit_standard_scm(pre).alpha_hat[0], oracle, 1e-12);
}

TEST(StandardScm, NoWorseThanZeroWeights) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PretreatmentData pre = random_pre(12, 5, seed);
    const ScmFit fit = fit_standard_scm(pre);
    const double objective = (pre.treated - pre.controls * fit.alpha_hat).squaredNorm();
    EXPECT_LE(objective, pre.treated.squaredNorm());
  }
}

TEST(StandardScm, RankDeficientDesignWarns) {
  PretreatmentData pre = random_pre(3, 6, 3);
  const ScmFit fit = fit_standard_scm(pre);
  EXPECT_TRUE(fit.rank_deficient());
  EXPECT_EQ(fit.rank, 3);
  // Minimum-norm solution still interpolates.
  EXPECT_LT(fit.pretreatment_rmse, 1e-10);
}

TEST(StandardScm, RecoversPlantedWeightsWithLowNoise) {
  Rng rng(4);
  const VectorXd alpha = planted_alpha(16);
  PretreatmentData pre = random_pre(50, 16, 4);
  for (int t = 0; t < 50; ++t) pre.treated[t] = pre.controls.row(t).dot(alpha) + 0.01 * standard_normal(rng);
  const ScmFit fit = fit_standard_scm(pre);
  EXPECT_LT((fit.alpha_hat - alpha).lpNorm<Eigen::Infinity>(), 0.05);
}

TEST(StandardScm, EmptyWindowIsAnError) {
  PretreatmentData pre;
  pre.controls.resize(0, 2);
  EXPECT_THROW(fit_standard_scm(pre), DataError);
}

TEST(ScmEffects, NoSpilloverPerfectFit) {
  SimScenario sc;
  sc.rho = 0.0;
  Rng rng(5);
  const SimDraw d = dgp_draw(sc, rng);
  const ScmFit fit = fit_standard_scm(d.panel);
  const auto gaps = scm_effects(fit, d.panel);
  ASSERT_EQ(gaps.size(), static_cast<std::size_t>(d.panel.n_post()));
  for (std::size_t j = 0; j < gaps.size(); ++j) EXPECT_NEAR(*gaps[j], d.true_treatment[j], 1e-8);
}

TEST(ScmEffects, MaskedPeriodIsEmpty) {
  SimScenario sc;
  Rng rng(6);
  SimDraw d = dgp_draw(sc, rng);
  d.panel.outcomes(3, 22) = std::nan("");
  d.panel.missing(3, 22) = true;
  const auto gaps = scm_effects(fit_standard_scm(d.panel), d.panel);
  EXPECT_FALSE(gaps[2].has_value());
  EXPECT_TRUE(gaps[3].has_value());
}

TEST(ScmEffects, SpilloverBiasAtStrongCorrelation) {
  // Gap minus truth equals alpha_hat'(Yc(0) - Yc(1)) once weights are exact.
  SimScenario sc;
  sc.rho = 0.8;
  Rng rng(7);
  const SimDraw d = dgp_draw(sc, rng);
  const ScmFit fit = fit_standard_scm(d.panel);
  const auto gaps = scm_effects(fit, d.panel);
  for (int j = 0; j < d.panel.n_post(); ++j) {
    const double bias = -fit.alpha_hat.dot(d.true_spillover.row(j).transpose());
    EXPECT_NEAR(*gaps[j] - d.true_treatment[j], bias, 1e-8);
  }
}

TEST(Bscm, DelegatesToWeightsChain) {
  const PretreatmentData pre = random_pre(20, 4, 8);
  ChainConfig c;
  c.iterations = 300;
  c.burn_in = 100;
  c.seed = 77;
  const WeightsPosterior a = fit_bscm(pre, c);
  const WeightsPosterior b = run_weights_chain(pre, c);
  EXPECT_EQ(a.alpha, b.alpha);
  EXPECT_EQ(a.sigma1_sq, b.sigma1_sq);
}

TEST(Bscm, ZeroSpilloverDataGivesSmallBias) {
  SimScenario sc;
  sc.rho = 0.0;
  Rng rng(9);
  const SimDraw d = dgp_draw(sc, rng);
  ChainConfig c;
  c.iterations = 1500;
  c.burn_in = 500;
  const WeightsPosterior post = fit_bscm(extract_pretreatment(d.panel), c);
  const EffectDraws e = bscm_effect_draws(post, d.panel, d.weights);
  for (int j = 0; j < e.n_post(); ++j) {
    EXPECT_NEAR(e.treatment.col(j).mean(), d.true_treatment[j], 0.1);
    EXPECT_TRUE(e.spillover[j].isZero(0.0));
  }
}
