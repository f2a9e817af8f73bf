#include <gtest/gtest.h>

#include <map>

#include "spillscm/io.hpp"
#include "spillscm/simulate.hpp"

using namespace spillscm;

TEST(RookMatrix, TwoByTwoCorners) {
  const MatrixXd w = rook_matrix(2);
  MatrixXd expected(4, 4);
  expected << 0, 1, 1, 0,
              1, 0, 0, 1,
              1, 0, 0, 1,
              0, 1, 1, 0;
  EXPECT_EQ(w, expected);
}

TEST(RookMatrix, DegreeHistogramOnFourByFour) {
  const MatrixXd w = rook_matrix(4);
  std::map<int, int> histogram;
  for (int i = 0; i < 16; ++i) ++histogram[static_cast<int>(w.row(i).sum())];
  EXPECT_EQ(histogram, (std::map<int, int>{{2, 4}, {3, 8}, {4, 4}}));
}

TEST(RookMatrix, SymmetricWithZeroDiagonal) {
  const MatrixXd w = rook_matrix(8);
  EXPECT_EQ(w, w.transpose());
  EXPECT_TRUE(w.diagonal().isZero(0.0));
  EXPECT_THROW(rook_matrix(1), ConfigError);
}

TEST(PlantedWeights, Entries) {
  const VectorXd a = planted_alpha(16);
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], -0.2);
  EXPECT_DOUBLE_EQ(a[2], 0.4);
  EXPECT_DOUBLE_EQ(a[3], 0.4);
  for (int i = 4; i < 10; ++i) EXPECT_DOUBLE_EQ(a[i], 1.0 / 60.0);
  EXPECT_TRUE(a.tail(6).isZero(0.0));
  EXPECT_NEAR(a.sum(), 1.2, 1e-15);
  EXPECT_EQ(planted_alpha(64).size(), 64);
}

TEST(Dgp, NoSpilloverWithoutCorrelation) {
  SimScenario sc;
  sc.rho = 0.0;
  Rng rng(1);
  const SimDraw d = dgp_draw(sc, rng);
  EXPECT_TRUE(d.true_spillover.isZero(0.0));
  EXPECT_EQ(d.panel.n_controls(), 16);
  EXPECT_EQ(d.panel.n_periods(), 30);
  EXPECT_EQ(d.panel.t0, 20);
  EXPECT_EQ(d.weights.w.head(4), VectorXd::Ones(4));
  EXPECT_TRUE(d.weights.w.tail(12).isZero(0.0));
}

TEST(Dgp, PretreatmentTreatedIsSyntheticCombination) {
  SimScenario sc;
  sc.rho = 0.3;
  Rng rng(2);
  const SimDraw d = dgp_draw(sc, rng);
  for (int t = 0; t < sc.t0; ++t) {
    EXPECT_NEAR(d.panel.treated(t), planted_alpha(16).dot(d.panel.controls(t)), 1e-10);
  }
}

TEST(Dgp, IdentificationRecoversTruth) {
  for (double rho : standard_rho_grid()) {
    SimScenario sc;
    sc.rho = rho;
    Rng rng(3);
    const SimDraw d = dgp_draw(sc, rng);
    const IdentificationSolver solver(d.planted, d.weights);
    for (int j = 0; j < d.panel.n_post(); ++j) {
      const int t = sc.t0 + j;
      EXPECT_NEAR(solver.treatment_effect(d.panel.controls(t), d.panel.treated(t)),
                  d.true_treatment[j], 1e-10);
      EXPECT_LT((solver.spillover_effects(d.panel.controls(t), d.panel.treated(t)) -
                 d.true_spillover.row(j).transpose())
                    .lpNorm<Eigen::Infinity>(),
                1e-10);
    }
  }
}

TEST(Dgp, TreatmentEffectsAverageOne) {
  SimScenario sc;
  sc.rho = 0.1;
  sc.t_total = 21;
  sc.t0 = 20;
  Rng rng(4);
  double sum = 0.0;
  const int n = 10000;
  for (int r = 0; r < n; ++r) sum += dgp_draw(sc, rng).true_treatment[0];
  EXPECT_NEAR(sum / n, 1.0, 0.05);
}

TEST(Dgp, SingularDesignThrows) {
  SimScenario sc;
  sc.rho = 1.0 / (1.0 + std::sqrt(5.0));  // 1 / largest eigenvalue of the 4x4 rook W
  Rng rng(5);
  EXPECT_THROW(dgp_draw(sc, rng), SingularSystemError);
}

TEST(Scenario, Validation) {
  SimScenario sc;
  sc.n_controls = 15;
  EXPECT_THROW(sc.validate(), ConfigError);
  sc.n_controls = 16;
  sc.t0 = 30;
  EXPECT_THROW(sc.validate(), ConfigError);
}

TEST(ScenarioGrid, ParsesTriplesAndFullGrid) {
  const auto cells = parse_scenario_grid("16:30:20, 36:60:50");
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[1].n_controls, 36);
  EXPECT_EQ(cells[1].t_total, 60);
  EXPECT_EQ(cells[1].t0, 50);
  EXPECT_EQ(parse_scenario_grid("full").size(), 6u);
  EXPECT_THROW(parse_scenario_grid("16-30-20"), ConfigError);
  EXPECT_THROW(parse_scenario_grid(""), ConfigError);
}

namespace {

SimScenario small_scenario(double rho) {
  SimScenario sc;
  sc.rho = rho;
  sc.replications = 4;
  sc.sampler.chain.iterations = 400;
  sc.sampler.chain.burn_in = 200;
  sc.seed = 11;
  return sc;
}

}  // namespace

TEST(MonteCarlo, RmseBoundsBias) {
  const MetricsReport rep = run_monte_carlo(small_scenario(0.1), MethodSet{}, 1);
  EXPECT_EQ(rep.replications + rep.failures, 4);
  for (const auto& m : rep.methods) EXPECT_GE(m.rmse, std::abs(m.bias)) << m.method;
  ASSERT_TRUE(rep.has_coverage);
  EXPECT_EQ(rep.coverage_cells, 10 * rep.replications);
  EXPECT_GE(rep.coverage, 0.0);
  EXPECT_LE(rep.coverage, 1.0);
}

TEST(MonteCarlo, IndependentOfThreadCount) {
  const MetricsReport a = run_monte_carlo(small_scenario(-0.3), MethodSet{}, 1);
  const MetricsReport b = run_monte_carlo(small_scenario(-0.3), MethodSet{}, 3);
  std::ostringstream sa, sb;
  write_metrics_csv(sa, {a});
  write_metrics_csv(sb, {b});
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(MonteCarlo, ScmUnbiasedWithoutSpillover) {
  SimScenario sc = small_scenario(0.0);
  sc.replications = 10;
  const MetricsReport rep = run_monte_carlo(sc, MethodSet{false, true, false}, 1);
  ASSERT_EQ(rep.methods.size(), 1u);
  EXPECT_LT(std::abs(rep.methods[0].bias), 1e-8);
  EXPECT_FALSE(rep.has_coverage);
}

TEST(MonteCarlo, ReplicationSeedsAreDistinct) {
  EXPECT_NE(replication_seed(1, 0), replication_seed(1, 1));
  EXPECT_NE(replication_seed(1, 0), replication_seed(2, 0));
}

TEST(MetricsSchema, ColumnsInPublishedOrder) {
  const MetricsReport rep = run_monte_carlo(small_scenario(0.0), MethodSet{false, true, false}, 1);
  std::ostringstream out;
  write_metrics_csv(out, {rep});
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  std::string joined;
  for (const auto& c : metrics_csv_columns()) joined += (joined.empty() ? "" : ",") + c;
  EXPECT_EQ(header, joined);
  EXPECT_EQ(joined, "n_controls,t_total,t0,rho,method,bias,rmse,coverage,replications,failures");
}
