#include <gtest/gtest.h>

#include <random>

#include "spillscm/identify.hpp"
#include "support.hpp"

using namespace spillscm;

namespace {

SpatialWeights scalar_weights() {
  SpatialWeights s;
  s.w = VectorXd::Ones(1);
  s.W = MatrixXd::Zero(1, 1);
  return s;
}

}  // namespace

TEST(IdentificationMatrix, RhoZeroIsIdentity) {
  std::mt19937_64 rng(1);
  const auto f = testing_support::random_instance(rng, 5, 0.3);
  const StructuralParams params{f.alpha, 0.0};
  EXPECT_EQ(identification_matrix(params, f.weights), MatrixXd::Identity(5, 5));
  const InvertibilityCheck c = check_invertibility(params, f.weights);
  EXPECT_TRUE(c.ok);
  EXPECT_DOUBLE_EQ(c.condition_number, 1.0);
}

TEST(IdentificationMatrix, ScalarSingularAtRhoOne) {
  const StructuralParams params{VectorXd::Ones(1), 1.0};
  EXPECT_DOUBLE_EQ(identification_matrix(params, scalar_weights())(0, 0), 0.0);
  EXPECT_FALSE(check_invertibility(params, scalar_weights()).ok);
}

TEST(IdentificationMatrix, ScalarHalf) {
  const StructuralParams params{VectorXd::Ones(1), 0.5};
  EXPECT_DOUBLE_EQ(identification_matrix(params, scalar_weights())(0, 0), 0.5);
  EXPECT_TRUE(check_invertibility(params, scalar_weights()).ok);
}

TEST(IdentificationMatrix, DimensionMismatchThrows) {
  const StructuralParams params{VectorXd::Ones(2), 0.5};
  EXPECT_THROW(identification_matrix(params, scalar_weights()), DataError);
}

TEST(Counterfactual, RhoZeroReturnsObserved) {
  std::mt19937_64 rng(2);
  const auto f = testing_support::random_instance(rng, 6, 0.4);
  const VectorXd cf = counterfactual_controls({f.alpha, 0.0}, f.weights, f.yc1, f.y01);
  EXPECT_EQ(cf, f.yc1);
}

TEST(Counterfactual, ScalarClosedForm) {
  // (1 / 0.5) (2 - 0.5 * 3) = 2 y1 - y0 = 1
  const StructuralParams params{VectorXd::Ones(1), 0.5};
  const VectorXd yc = VectorXd::Constant(1, 2.0);
  EXPECT_NEAR(counterfactual_controls(params, scalar_weights(), yc, 3.0)[0], 1.0, 1e-15);
  EXPECT_NEAR(treatment_effect(params, scalar_weights(), yc, 3.0), 2.0, 1e-15);
  EXPECT_NEAR(spillover_effects(params, scalar_weights(), yc, 3.0)[0], 1.0, 1e-15);
}

TEST(Counterfactual, ForwardSimulatedRecovery) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> rho_dist(-0.8, 0.8);
  for (int rep = 0; rep < 50; ++rep) {
    const auto f = testing_support::random_instance(rng, 5, rho_dist(rng));
    const IdentificationSolver solver({f.alpha, f.rho}, f.weights);
    ASSERT_TRUE(solver.invertible());
    EXPECT_LT((solver.counterfactual_controls(f.yc1, f.y01) - f.yc0).lpNorm<Eigen::Infinity>(),
              1e-10);
    EXPECT_NEAR(solver.treatment_effect(f.yc1, f.y01), f.tau, 1e-10);
    EXPECT_LT((solver.spillover_effects(f.yc1, f.y01) - (f.yc1 - f.yc0)).lpNorm<Eigen::Infinity>(),
              1e-10);
  }
}

TEST(Counterfactual, SingularSystemThrows) {
  const StructuralParams params{VectorXd::Ones(1), 1.0};
  const VectorXd yc = VectorXd::Constant(1, 2.0);
  EXPECT_THROW(counterfactual_controls(params, scalar_weights(), yc, 3.0), SingularSystemError);
  try {
    treatment_effect(params, scalar_weights(), yc, 3.0);
  } catch (const SingularSystemError& e) {
    EXPECT_TRUE(std::isinf(e.condition_number()));
  }
}

TEST(Counterfactual, WrongLengthThrows) {
  const IdentificationSolver solver({VectorXd::Ones(1), 0.5}, scalar_weights());
  EXPECT_THROW(solver.counterfactual_controls(VectorXd::Ones(2), 1.0), DataError);
}

TEST(ScmGap, ExactMatchAndHandValue) {
  VectorXd alpha = VectorXd::Zero(3);
  alpha[0] = 1.0;
  EXPECT_DOUBLE_EQ(standard_scm_gap(alpha, (VectorXd(3) << 7, 1, 2).finished(), 7.0), 0.0);
  EXPECT_DOUBLE_EQ(standard_scm_gap((VectorXd(2) << 0.5, 0.5).finished(),
                                    (VectorXd(2) << 4, 6).finished(), 5.0),
                   0.0);
}

TEST(ScmGap, RhoZeroTreatmentEffectMatchesGap) {
  std::mt19937_64 rng(4);
  const auto f = testing_support::random_instance(rng, 7, 0.5);
  EXPECT_EQ(treatment_effect({f.alpha, 0.0}, f.weights, f.yc1, f.y01),
            standard_scm_gap(f.alpha, f.yc1, f.y01));
}

TEST(ScmGap, BiasDecomposesIntoWeightedSpillovers) {
  std::mt19937_64 rng(5);
  const auto f = testing_support::random_instance(rng, 6, 0.8);
  const double gap = standard_scm_gap(f.alpha, f.yc1, f.y01);
  const double direct = f.alpha.dot(f.yc0 - f.yc1);
  EXPECT_NEAR(gap - f.tau, direct, 1e-10);
}
