// Copyright 2026 The Groupwise Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "groupwise/modeling/models.hpp"
#include "groupwise/modeling/report.hpp"
#include "generators.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>
#include <set>
#include <sstream>

using namespace groupwise;
using namespace groupwise::modeling;

namespace
{

std::vector<std::string> names(std::size_t k)
{
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

double coef(const ModelFit & f, std::size_t block, std::size_t i) { return f.blocks[block].coefficients[i].estimate; }

features::FeatureTable table_from(const gen::Sample & s)
{
  features::FeatureTable t;
  t.names = names(static_cast<std::size_t>(s.X.cols()));
  for (Eigen::Index i = 0; i < s.X.rows(); ++i) {
    std::vector<double> r(static_cast<std::size_t>(s.X.cols()));
    for (Eigen::Index c = 0; c < s.X.cols(); ++c) r[static_cast<std::size_t>(c)] = s.X(i, c);
    t.rows.push_back(r);
    t.labels.push_back(s.y[i]);
  }
  return t;
}

}  // namespace

TEST(BinaryLogit, InterceptOnlyIsLogOdds)
{
  Eigen::MatrixXd X = Eigen::MatrixXd::Constant(40, 1, 3.0);
  Eigen::VectorXi y = Eigen::VectorXi::Zero(40);
  y.head(10).setOnes();
  const auto fit = fit_binary_logistic(X, y, {"flat"});
  EXPECT_EQ(fit.dropped_constant, (std::vector<std::string>{"flat"}));
  EXPECT_TRUE(fit.variables.empty());
  ASSERT_EQ(fit.blocks[0].coefficients.size(), 1u);
  EXPECT_NEAR(coef(fit, 0, 0), std::log(10.0 / 30.0), 1e-8);
  EXPECT_TRUE(fit.converged);
}

TEST(BinaryLogit, TwoByTwoTableClosedForm)
{
  // x = 0: 30 cases / 70 controls; x = 1: 60 / 40.
  Eigen::MatrixXd X(200, 1);
  Eigen::VectorXi y(200);
  for (int i = 0; i < 200; ++i) {
    X(i, 0) = i < 100 ? 0 : 1;
    y[i] = i < 100 ? (i < 30) : (i - 100 < 60);
  }
  const auto fit = fit_binary_logistic(X, y, {"x"});
  EXPECT_NEAR(coef(fit, 0, 0), std::log(30.0 / 70.0), 1e-6);
  EXPECT_NEAR(coef(fit, 0, 1), std::log(60.0 / 40.0) - std::log(30.0 / 70.0), 1e-6);
  EXPECT_NEAR(fit.blocks[0].coefficients[1].std_error, std::sqrt(1 / 30.0 + 1 / 70.0 + 1 / 60.0 + 1 / 40.0), 1e-6);
  EXPECT_EQ(fit.blocks[0].coefficients[0].name, kIntercept);
  const double ll = 30 * std::log(0.3) + 70 * std::log(0.7) + 60 * std::log(0.6) + 40 * std::log(0.4);
  EXPECT_NEAR(fit.log_likelihood, ll, 1e-8);
  EXPECT_NEAR(fit.aic, 4 - 2 * ll, 1e-8);
}

TEST(BinaryLogit, RecoversCoefficientsAndKeepsScoreIdentity)
{
  Rng rng(101);
  const auto s = gen::logit(rng, 20000, {-1.0, 2.0, -0.5});
  const auto fit = fit_binary_logistic(s.X, s.y, names(2));
  EXPECT_NEAR(coef(fit, 0, 0), -1.0, 0.08);
  EXPECT_NEAR(coef(fit, 0, 1), 2.0, 0.08);
  EXPECT_NEAR(coef(fit, 0, 2), -0.5, 0.08);
  for (std::size_t i = 1; i < fit.ll_trace.size(); ++i) EXPECT_GE(fit.ll_trace[i], fit.ll_trace[i - 1]);
  // At the MLE the mean fitted probability equals the observed prevalence.
  const auto p = predict_binary(fit, s.X);
  EXPECT_NEAR(p.mean(), s.y.cast<double>().mean(), 1e-8);
  EXPECT_FALSE(fit.separation);
}

TEST(BinaryLogit, SeparationIsFlagged)
{
  Eigen::MatrixXd X(20, 1);
  Eigen::VectorXi y(20);
  for (int i = 0; i < 20; ++i) {
    X(i, 0) = i;
    y[i] = i >= 10;
  }
  const auto fit = fit_binary_logistic(X, y, {"x"});
  EXPECT_TRUE(fit.separation);
  EXPECT_FALSE(fit.warnings.empty());
}

TEST(BinaryLogit, RejectsBadInput)
{
  Eigen::MatrixXd X(10, 2);
  Eigen::VectorXi y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = i;
    X(i, 1) = 2.0 * i + 1.0;  // collinear with the intercept and x0
    y[i] = i % 2;
  }
  EXPECT_THROW(fit_binary_logistic(X, y, names(2)), NumericError);
  Eigen::VectorXi three = y;
  three[0] = 2;
  EXPECT_THROW(fit_binary_logistic(X.leftCols(1), three, names(1)), NumericError);
  EXPECT_THROW(fit_binary_logistic(Eigen::MatrixXd(0, 1), Eigen::VectorXi(0), names(1)), NumericError);
}

TEST(Multinomial, InterceptOnlyIsLogRatios)
{
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(60, 1);
  Eigen::VectorXi y(60);
  for (int i = 0; i < 60; ++i) y[i] = i < 10 ? 0 : (i < 30 ? 1 : 2);
  const auto fit = fit_multinomial(X, y, {"z"});
  EXPECT_EQ(fit.reference_label, 0);
  ASSERT_EQ(fit.blocks.size(), 2u);
  EXPECT_EQ(fit.blocks[0].label, 1);
  EXPECT_NEAR(coef(fit, 0, 0), std::log(2.0), 1e-6);
  EXPECT_NEAR(coef(fit, 1, 0), std::log(3.0), 1e-6);
}

TEST(Multinomial, TwoClassReducesToBinary)
{
  Rng rng(8);
  const auto s = gen::logit(rng, 3000, {0.3, 1.0, -0.7});
  const auto b = fit_binary_logistic(s.X, s.y, names(2));
  const auto m = fit_multinomial(s.X, s.y, names(2));
  ASSERT_EQ(m.blocks.size(), 1u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(coef(m, 0, i), coef(b, 0, i), 1e-6);
    EXPECT_NEAR(m.blocks[0].coefficients[i].std_error, b.blocks[0].coefficients[i].std_error, 1e-6);
  }
  EXPECT_NEAR(m.log_likelihood, b.log_likelihood, 1e-6);
}

TEST(Multinomial, RecoversCoefficientsAndProbabilitiesSumToOne)
{
  Rng rng(9);
  Eigen::MatrixXd B(3, 3);
  B << 0.2, -0.3, 0.5,
       1.0, -1.0, 0.5,
       -0.5, 0.8, 1.2;
  const auto s = gen::softmax(rng, 20000, B);
  const auto fit = fit_multinomial(s.X, s.y, names(2));
  ASSERT_EQ(fit.blocks.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) {
    for (std::size_t r = 0; r < 3; ++r) {
      EXPECT_NEAR(coef(fit, j, r), B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)), 0.1);
    }
  }
  for (std::size_t i = 1; i < fit.ll_trace.size(); ++i) EXPECT_GE(fit.ll_trace[i], fit.ll_trace[i - 1]);
  const auto P = predict_multinomial(fit, s.X.topRows(500));
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    EXPECT_NEAR(P.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(P.row(i).minCoeff(), 0.0);
  }
  const auto cls = predict_class(fit, s.X.topRows(10));
  for (int c : cls) EXPECT_TRUE(c >= 0 && c <= 3);
}

TEST(Multinomial, RejectsSingleClass)
{
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(20, 1);
  EXPECT_THROW(fit_multinomial(X, Eigen::VectorXi::Zero(20), {"x"}), NumericError);
}

TEST(Auc, WorkedExamples)
{
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, y), 0.75);
  const std::vector<double> tied = {0.5, 0.5, 0.5, 0.5};
  EXPECT_DOUBLE_EQ(auc(tied, y), 0.5);
  const std::vector<double> perfect = {0.1, 0.2, 0.3, 0.4};
  EXPECT_DOUBLE_EQ(auc(perfect, y), 1.0);
  const std::vector<int> one = {1, 1, 1, 1};
  EXPECT_THROW(auc(s, one), NumericError);
}

TEST(Auc, EqualsPairCountingWithTies)
{
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 2 + rng.index(200);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so ties are common.
      s[i] = std::round(rng.uniform() * 20.0) / 20.0;
      y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    y[0] = 1;
    y[1] = 0;
    EXPECT_DOUBLE_EQ(auc(s, y), oracle::auc_pairs(s, y));
    // Invariant under strictly increasing maps.
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    EXPECT_DOUBLE_EQ(auc(t, y), auc(s, y));
  }
}

TEST(Metrics, ConfusionRatesAtThreshold)
{
  const std::vector<double> s = {0.9, 0.6, 0.4, 0.2, 0.7};
  const std::vector<int> y = {1, 1, 1, 0, 0};
  const auto m = evaluate_scores(s, y, 0.5);
  EXPECT_DOUBLE_EQ(m.tpr, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.tnr, 0.5);
  EXPECT_DOUBLE_EQ(m.acc, 3.0 / 5.0);
  EXPECT_DOUBLE_EQ(m.auc, oracle::auc_pairs(s, y));
}

TEST(Preprocess, WinsorizeClipsToNearestRankPercentiles)
{
  features::FeatureTable t;
  t.names = {"x", "flag"};
  for (int i = 1; i <= 99; ++i) {
    t.rows.push_back({static_cast<double>(i), static_cast<double>(i % 2)});
    t.labels.push_back(0);
  }
  t.rows.push_back({1e6, 0});
  t.labels.push_back(0);
  winsorize(t, 1, 99);
  EXPECT_EQ(t.rows.back()[0], 99);
  EXPECT_EQ(t.rows.front()[0], 1);
  // Binary columns are left alone.
  EXPECT_EQ(t.rows[0][1], 1);
}

TEST(Preprocess, DiscretizeBoundsDistinctValues)
{
  features::FeatureTable t;
  t.names = {"x"};
  Rng rng(1);
  for (int i = 0; i < 500; ++i) {
    t.rows.push_back({rng.normal()});
    t.labels.push_back(0);
  }
  discretize(t, 4);
  std::set<double> vals;
  for (const auto & r : t.rows) vals.insert(r[0]);
  EXPECT_LE(vals.size(), 4u);
  EXPECT_GE(vals.size(), 2u);
}

TEST(Preprocess, DownSamplesSplitsAndStandardises)
{
  features::FeatureTable t;
  t.names = {"a", "b"};
  Rng rng(2);
  for (int i = 0; i < 1050; ++i) {
    t.rows.push_back({rng.normal(5, 2), rng.uniform(0, 100)});
    t.labels.push_back(i < 50 ? 1 : 0);
  }
  PreprocessSpec spec;
  const auto p = preprocess(t, spec);
  EXPECT_EQ(p.rows_after_downsample, 250u);
  EXPECT_EQ(p.train_x.rows() + p.valid_x.rows(), 250);
  EXPECT_EQ(p.train_y.sum(), 35);  // round(0.7 * 50)
  EXPECT_EQ(p.train_x.rows(), 35 + 140);
  for (Eigen::Index c = 0; c < 2; ++c) {
    const double m = p.train_x.col(c).mean();
    const double sd = std::sqrt((p.train_x.col(c).array() - m).square().mean());
    EXPECT_NEAR(m, 0.0, 1e-9);
    EXPECT_NEAR(sd, 1.0, 1e-9);
  }
  // Same seed, same split.
  const auto q = preprocess(t, spec);
  EXPECT_EQ(p.train_x, q.train_x);
  spec.seed = 43;
  EXPECT_NE(preprocess(t, spec).train_x, p.train_x);
  spec.max_rows = 100;
  const auto capped = preprocess(t, spec);
  EXPECT_EQ(capped.rows_after_downsample, 100u);
  EXPECT_EQ(capped.train_y.sum() + capped.valid_y.sum(), 20);
}

TEST(Preprocess, RejectsThinClassesAndBadSettings)
{
  features::FeatureTable t;
  t.names = {"a"};
  for (int i = 0; i < 100; ++i) {
    t.rows.push_back({static_cast<double>(i)});
    t.labels.push_back(i < 5 ? 1 : 0);
  }
  EXPECT_THROW(preprocess(t, {}), DataError);
  PreprocessSpec loose;
  loose.min_class_rows = 5;
  EXPECT_NO_THROW(preprocess(t, loose));
  loose.train_fraction = 1.0;
  EXPECT_THROW(preprocess(t, loose), UsageError);
}

TEST(Selection, DuplicatePredictorLeavesOneCopy)
{
  Rng rng(11);
  auto s = gen::logit(rng, 4000, {-0.5, 1.5});
  Eigen::MatrixXd X(s.X.rows(), 2);
  X.col(0) = s.X.col(0);
  X.col(1) = s.X.col(0);
  const auto res = select_variables(X, {"a", "a_copy"}, binary_fitter(X, s.y));
  ASSERT_EQ(res.survivors.size(), 1u);
  ASSERT_FALSE(res.trace.empty());
  EXPECT_EQ(res.trace[0].reason, "correlated");
  EXPECT_NEAR(res.trace[0].value, 1.0, 1e-12);
}

TEST(Selection, InformativeOrthogonalPredictorsSurvive)
{
  Rng rng(12);
  const auto s = gen::logit(rng, 5000, {0.0, 1.0, -1.0});
  const auto res = select_variables(s.X, names(2), binary_fitter(s.X, s.y));
  EXPECT_EQ(res.survivors, (std::vector<std::size_t>{0, 1}));
  EXPECT_TRUE(res.trace.empty());
}

TEST(Selection, UninformativeCandidatesAreRejectedWithTrace)
{
  // x has the same empirical distribution in both classes, so its MLE slope is 0.
  Eigen::MatrixXd X(80, 1);
  Eigen::VectorXi y(80);
  for (int i = 0; i < 80; ++i) {
    X(i, 0) = i % 4;
    y[i] = (i / 4) % 2;
  }
  try {
    select_variables(X, {"noise"}, binary_fitter(X, y));
    FAIL() << "expected SelectionError";
  } catch (const SelectionError & e) {
    ASSERT_EQ(e.trace().size(), 1u);
    EXPECT_EQ(e.trace()[0].variable, "noise");
    EXPECT_EQ(e.trace()[0].reason, "insignificant");
    EXPECT_NEAR(e.trace()[0].value, 1.0, 1e-6);
  }
}

TEST(Selection, VarianceInflationOfNearCollinearColumn)
{
  Rng rng(13);
  Eigen::MatrixXd X(2000, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    X(i, 0) = rng.normal();
    X(i, 1) = rng.normal();
    X(i, 2) = X(i, 0) + X(i, 1) + 0.1 * rng.normal();
  }
  EXPECT_GT(variance_inflation(X, 2, {0, 1}), 100.0);
  EXPECT_LT(variance_inflation(X, 0, {1}), 1.1);
  // With a lenient correlation limit only the VIF stage catches the redundancy.
  Eigen::VectorXi y(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) y[i] = rng.bernoulli(1.0 / (1.0 + std::exp(-(X(i, 0) - X(i, 1))))) ? 1 : 0;
  SelectionProtocol protocol;
  protocol.correlation = 0.99;
  const auto res = select_variables(X, names(3), binary_fitter(X, y), protocol);
  bool vif_step = false;
  for (const auto & st : res.trace) vif_step |= st.reason == "vif";
  EXPECT_TRUE(vif_step || res.survivors.size() < 3);
  EXPECT_LE(res.survivors.size(), 2u);
}

TEST(Models, FormationPipelineProducesMetricsAndJson)
{
  Rng rng(14);
  auto s = gen::logit(rng, 6000, {-2.5, 1.2, 0.0, -0.8});
  const auto t = table_from(s);
  ModelConfig cfg;
  const auto run = fit_formation_model(t, cfg);
  ASSERT_TRUE(run.fit.train && run.fit.validation);
  EXPECT_GT(run.fit.validation->auc, 0.7);
  EXPECT_EQ(run.n_train + run.n_valid, run.rows_after_downsample);
  const auto j = report_json(run, "formation", nlohmann::json::object());
  for (const char * key : {"model", "seed", "config", "n_train", "n_validation", "reference_label", "variables",
                           "dropped_constant", "classes", "log_likelihood", "aic", "iterations", "converged",
                           "separation_warning", "warnings", "selection_trace", "metrics"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  EXPECT_TRUE(j["metrics"]["validation"].contains("auc"));
  std::ostringstream txt;
  write_text_report(txt, "Formation", run);
  EXPECT_NE(txt.str().find("(intercept)"), std::string::npos);
}

TEST(Models, PropagationPipelineReportsAccuracy)
{
  Rng rng(15);
  Eigen::MatrixXd B(3, 3);
  B << 0.0, 0.3, -0.2,
       1.0, -1.0, 0.5,
       0.5, 0.8, -1.2;
  const auto s = gen::softmax(rng, 3000, B);
  const auto run = fit_propagation_model(table_from(s), {});
  ASSERT_TRUE(run.fit.train_accuracy && run.fit.validation_accuracy);
  EXPECT_GT(*run.fit.validation_accuracy, 0.3);
  EXPECT_EQ(run.fit.blocks.size(), 3u);
  EXPECT_EQ(run.rows_after_downsample, 3000u);  // no down-sampling for this model
}
