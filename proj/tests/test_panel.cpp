#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "spillscm/panel.hpp"

using namespace spillscm;

namespace {

const char* kSmall =
    "unit,time,treated,outcome,x\n"
    "A,1,1,1.0,NA\n"
    "A,2,1,2.0,NA\n"
    "A,3,1,3.0,NA\n"
    "A,4,1,4.0,NA\n"
    "B,1,0,1.5,0.1\n"
    "B,2,0,2.5,0.2\n"
    "B,3,0,3.5,0.3\n"
    "B,4,0,4.5,0.4\n"
    "C,1,0,0.5,1.1\n"
    "C,2,0,1.5,1.2\n"
    "C,3,0,2.5,1.3\n"
    "C,4,0,3.5,1.4\n";

PanelData load(const std::string& text, int t0) {
  std::istringstream in(text);
  return load_panel(in, PanelSchema{}, t0);
}

}  // namespace

TEST(LoadPanel, MinimalWellFormedInput) {
  const PanelData p = load(kSmall, 2);
  EXPECT_EQ(p.n_controls(), 2);
  EXPECT_EQ(p.n_periods(), 4);
  EXPECT_EQ(p.n_post(), 2);
  EXPECT_EQ(p.n_covariates(), 1);
  EXPECT_EQ(p.unit_labels.front(), "A");
  EXPECT_DOUBLE_EQ(p.treated(3), 4.0);
  EXPECT_DOUBLE_EQ(p.controls(1)[1], 1.5);
  EXPECT_DOUBLE_EQ(p.covariates[2](0, 0), 0.3);
  EXPECT_FALSE(p.missing.any());
}

TEST(LoadPanel, TreatedUnitMovesToFront) {
  std::string text = "unit,time,treated,outcome\n"
                     "B,1,0,1\nB,2,0,2\nA,1,1,1\nA,2,1,2\n";
  const PanelData p = load(text, 1);
  EXPECT_EQ(p.unit_labels, (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(p.n_covariates(), 0);
}

TEST(LoadPanel, NumericTimesAreSorted) {
  std::string text = "unit,time,treated,outcome\n"
                     "A,10,1,3\nA,2,1,1\nA,9,1,2\nB,10,0,6\nB,2,0,4\nB,9,0,5\n";
  const PanelData p = load(text, 2);
  EXPECT_EQ(p.time_labels, (std::vector<std::string>{"2", "9", "10"}));
  EXPECT_DOUBLE_EQ(p.treated(2), 3.0);
}

TEST(LoadPanel, MissingPostTreatmentOutcomeIsMasked) {
  std::string text = kSmall;
  text.replace(text.find("A,3,1,3.0"), 9, "A,3,1,NA ");
  const PanelData p = load(text, 2);
  EXPECT_TRUE(p.missing(0, 2));
  EXPECT_FALSE(p.period_complete(2));
  EXPECT_TRUE(p.period_complete(3));
  EXPECT_TRUE(std::isnan(p.outcomes(0, 2)));
}

TEST(LoadPanel, MissingPretreatmentOutcomeIsRejected) {
  std::string text = kSmall;
  text.replace(text.find("B,1,0,1.5"), 9, "B,1,0,   ");
  EXPECT_THROW(load(text, 2), DataError);
}

TEST(LoadPanel, AbsentRowCountsAsMissing) {
  std::string text = kSmall;
  text.erase(text.find("C,4,0"), std::string("C,4,0,3.5,1.4\n").size());
  const PanelData p = load(text, 2);
  EXPECT_TRUE(p.missing(2, 3));
}

TEST(LoadPanel, TwoTreatedUnitsIsAnError) {
  const std::string text = "unit,time,treated,outcome\n"
                           "A,1,1,1\nA,2,1,2\nB,1,1,3\nB,2,1,4\nC,1,0,5\nC,2,0,6\n";
  EXPECT_THROW(load(text, 1), DataError);
}

TEST(LoadPanel, DuplicateRowIsAnError) {
  std::string text = std::string(kSmall) + "B,2,0,9.0,0.0\n";
  EXPECT_THROW(load(text, 2), DataError);
}

TEST(LoadPanel, MissingColumnIsAnError) {
  EXPECT_THROW(load("unit,time,outcome\nA,1,1\n", 1), DataError);
}

TEST(LoadPanel, NonNumericOutcomeIsAnError) {
  std::string text = kSmall;
  text.replace(text.find("B,2,0,2.5"), 9, "B,2,0,abc");
  EXPECT_THROW(load(text, 2), DataError);
}

TEST(LoadPanel, T0OutOfRangeIsAConfigurationError) {
  EXPECT_THROW(load(kSmall, 0), ConfigError);
  EXPECT_THROW(load(kSmall, 4), ConfigError);
}

TEST(LoadPanel, SaveRoundTrip) {
  std::string text = kSmall;
  text.replace(text.find("A,4,1,4.0"), 9, "A,4,1,NA ");
  const PanelData p = load(text, 2);
  std::ostringstream out;
  save_panel(out, p);
  const PanelData q = load(out.str(), 2);
  EXPECT_EQ(q.unit_labels, p.unit_labels);
  EXPECT_EQ(q.time_labels, p.time_labels);
  EXPECT_TRUE((q.missing == p.missing).all());
  for (int i = 0; i <= p.n_controls(); ++i)
    for (int t = 0; t < p.n_periods(); ++t)
      if (!p.missing(i, t)) EXPECT_EQ(q.outcomes(i, t), p.outcomes(i, t));
  for (int t = 0; t < p.n_periods(); ++t) EXPECT_EQ(q.covariates[t], p.covariates[t]);
}

TEST(LoadPanel, BundledSample) {
  std::ifstream in(std::string(SPILLSCM_DATA_DIR) + "/sample_panel.csv");
  ASSERT_TRUE(in);
  const PanelData p = load_panel(in, PanelSchema{}, 11);
  EXPECT_EQ(p.unit_labels.front(), "Sudan");
  EXPECT_EQ(p.n_controls(), 10);
  EXPECT_EQ(p.n_periods(), 16);
  EXPECT_EQ(p.covariate_names, (std::vector<std::string>{"inflation", "investment"}));
  EXPECT_EQ(p.time_labels[11], "2011");
  EXPECT_TRUE(p.missing(0, 11));
  EXPECT_EQ(p.missing.count(), 1);
}

TEST(PretreatmentSlice, HoldsOnlyEarlyPeriods) {
  const PretreatmentData pre = extract_pretreatment(load(kSmall, 3));
  EXPECT_EQ(pre.t0(), 3);
  EXPECT_EQ(pre.n_controls(), 2);
  EXPECT_DOUBLE_EQ(pre.treated[2], 3.0);
  EXPECT_DOUBLE_EQ(pre.controls(2, 1), 2.5);
  EXPECT_EQ(pre.covariates.size(), 3u);
}

TEST(CsvHelpers, QuotedFieldsAndMissingTokens) {
  const auto f = csv::split_record("\"a,b\",\"say \"\"hi\"\"\",3");
  ASSERT_EQ(f.size(), 3u);
  EXPECT_EQ(f[0], "a,b");
  EXPECT_EQ(f[1], "say \"hi\"");
  EXPECT_TRUE(csv::is_missing_token(" NA "));
  EXPECT_TRUE(csv::is_missing_token(""));
  EXPECT_FALSE(csv::is_missing_token("0"));
  EXPECT_EQ(csv::quote("a,b"), "\"a,b\"");
}

TEST(CsvHelpers, FormatExactRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789, 1e200}) {
    EXPECT_EQ(std::strtod(csv::format_exact(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(csv::format_exact(std::nan("")), "NA");
}

TEST(AdjacencyWeights, DirectEncoding) {
  const SpatialWeights s = build_adjacency_weights({{0, 1}, {1, 2}}, 2);
  EXPECT_EQ(s.w, (VectorXd(2) << 1, 0).finished());
  EXPECT_EQ(s.W, (MatrixXd(2, 2) << 0, 1, 1, 0).finished());
  EXPECT_TRUE(s.zero_rows.empty());
}

TEST(AdjacencyWeights, EmptyEdgeList) {
  const SpatialWeights s = build_adjacency_weights({}, 3);
  EXPECT_TRUE(s.w.isZero());
  EXPECT_TRUE(s.W.isZero());
  EXPECT_EQ(s.zero_rows, (std::vector<int>{0, 1, 2}));
}

TEST(AdjacencyWeights, RejectsBadEdges) {
  EXPECT_THROW(build_adjacency_weights({{0, 3}}, 2), DataError);
  EXPECT_THROW(build_adjacency_weights({{1, 1}}, 2), DataError);
}

TEST(AdjacencyWeights, ReadsLabelsAndIndices) {
  std::istringstream in("# comment\nA,B\n1,2\n\n");
  const auto edges = read_edge_list(in, {"A", "B", "C"});
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_EQ(edges[0], std::make_pair(0, 1));
  EXPECT_EQ(edges[1], std::make_pair(1, 2));
}

TEST(TradeWeights, ProportionalShares) {
  MatrixXd flows(3, 3);
  flows << 0, 1, 1,
           2, 0, 2,
           3, 1, 0;
  const SpatialWeights s = build_trade_weights(flows);
  EXPECT_TRUE(s.normalized);
  EXPECT_DOUBLE_EQ(s.w[0], 0.5);
  EXPECT_DOUBLE_EQ(s.W(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.W(0, 1), 0.5);
  EXPECT_DOUBLE_EQ(s.w[1], 0.75);
  EXPECT_DOUBLE_EQ(s.W(1, 0), 0.25);
}

TEST(TradeWeights, HandDivisionOnThreeCountries) {
  MatrixXd flows(4, 4);
  flows << 0, 3, 5, 7,
           3, 0, 2, 1,
           5, 2, 9, 4,
           7, 1, 4, 0;
  const SpatialWeights s = build_trade_weights(flows);
  // Row of unit 2: diagonal 9 ignored, sum 5 + 2 + 4 = 11.
  EXPECT_DOUBLE_EQ(s.w[1], 5.0 / 11.0);
  EXPECT_DOUBLE_EQ(s.W(1, 0), 2.0 / 11.0);
  EXPECT_DOUBLE_EQ(s.W(1, 1), 0.0);
  EXPECT_DOUBLE_EQ(s.W(1, 2), 4.0 / 11.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(s.block().row(i).sum(), 1.0, 1e-15);
}

TEST(TradeWeights, ZeroRowIsFlagged) {
  MatrixXd flows = MatrixXd::Zero(3, 3);
  flows(1, 0) = 4.0;
  const SpatialWeights s = build_trade_weights(flows);
  EXPECT_EQ(s.zero_rows, (std::vector<int>{1}));
  EXPECT_TRUE(s.block().row(1).isZero());
}

TEST(TradeWeights, RejectsNegativeFlows) {
  MatrixXd flows = MatrixXd::Ones(3, 3);
  flows(0, 1) = -1.0;
  EXPECT_THROW(build_trade_weights(flows), DataError);
}

TEST(RowNormalize, SharesAndIdempotence) {
  SpatialWeights s;
  s.w = (VectorXd(2) << 2, 1).finished();
  s.W = (MatrixXd(2, 2) << 0, 2, 0, 0).finished();
  const SpatialWeights once = row_normalize(s);
  EXPECT_EQ(once.block().row(0), (Eigen::RowVector3d(0.5, 0, 0.5)));
  EXPECT_EQ(once.block().row(1), (Eigen::RowVector3d(1, 0, 0)));
  const SpatialWeights twice = row_normalize(once);
  EXPECT_EQ(twice.block(), once.block());
}

TEST(WeightsMatrix, WriteReadRoundTrip) {
  SpatialWeights s;
  s.w = (VectorXd(2) << 0.25, 1).finished();
  s.W = (MatrixXd(2, 2) << 0, 0.75, 0, 0).finished();
  const std::vector<std::string> labels{"T", "a", "b"};
  std::ostringstream out;
  write_weights_matrix(out, s, labels);
  std::istringstream in(out.str());
  const SpatialWeights r = read_weights_matrix(in, labels);
  EXPECT_EQ(r.block(), s.block());
}

TEST(WeightsMatrix, RejectsSelfWeight) {
  std::istringstream in("unit,T,a,b\na,0,1,0\nb,0,0,0\n");
  EXPECT_THROW(read_weights_matrix(in, {"T", "a", "b"}), DataError);
}
