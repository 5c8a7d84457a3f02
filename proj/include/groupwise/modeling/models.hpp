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

#ifndef GROUPWISE__MODELING__MODELS_HPP_
#define GROUPWISE__MODELING__MODELS_HPP_

#include "groupwise/features.hpp"
#include "groupwise/modeling/fit.hpp"
#include "groupwise/modeling/logistic.hpp"
#include "groupwise/modeling/metrics.hpp"
#include "groupwise/modeling/multinomial.hpp"
#include "groupwise/modeling/preprocess.hpp"
#include "groupwise/modeling/selection.hpp"
#include "groupwise/risk.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <vector>

namespace groupwise::modeling
{

struct ModelConfig
{
  PreprocessSpec preprocess;
  SelectionProtocol protocol;
  double threshold = 0.5;  // classification cut for TPR/TNR/ACC
  bool select = true;
};

struct ModelRun
{
  ModelFit fit;
  std::size_t n_train = 0;
  std::size_t n_valid = 0;
  std::size_t rows_after_downsample = 0;
};

inline Metrics evaluate(const ModelFit & fit, const Eigen::MatrixXd & X, const Eigen::VectorXi & y,
                        double threshold = 0.5)
{
  const Eigen::VectorXd p = predict_binary(fit, X);
  std::vector<int> labels(y.data(), y.data() + y.size());
  return evaluate_scores(std::span<const double>(p.data(), static_cast<std::size_t>(p.size())),
                         labels, threshold);
}

inline std::vector<std::size_t> all_columns(std::size_t n)
{
  std::vector<std::size_t> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = i;
  return c;
}

/// Binary formation model: preprocessing, selection, final fit on the
/// training split, metrics on both splits.
inline ModelRun fit_formation_model(const features::FeatureTable & table, const ModelConfig & cfg)
{
  for (int y : table.labels) {
    if (y != 0 && y != 1) throw DataError(kModule, "formation labels must be 0/1");
  }
  const auto prep = preprocess(table, cfg.preprocess);
  std::vector<std::size_t> cols = all_columns(prep.names.size());
  std::vector<SelectionStep> trace;
  if (cfg.select) {
    auto sel = select_variables(prep.train_x, prep.names, binary_fitter(prep.train_x, prep.train_y),
                                cfg.protocol);
    cols = sel.survivors;
    trace = std::move(sel.trace);
  }
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(prep.names[c]);
  const Eigen::MatrixXd tx = take_columns(prep.train_x, cols);
  const Eigen::MatrixXd vx = take_columns(prep.valid_x, cols);
  ModelRun run;
  run.fit = fit_binary_logistic(tx, prep.train_y, names);
  run.fit.selection = std::move(trace);
  run.fit.seed = cfg.preprocess.seed;
  run.fit.train = evaluate(run.fit, tx, prep.train_y, cfg.threshold);
  run.fit.validation = evaluate(run.fit, vx, prep.valid_y, cfg.threshold);
  run.n_train = static_cast<std::size_t>(tx.rows());
  run.n_valid = static_cast<std::size_t>(vx.rows());
  run.rows_after_downsample = prep.rows_after_downsample;
  return run;
}

inline double accuracy(const ModelFit & fit, const Eigen::MatrixXd & X, const Eigen::VectorXi & y)
{
  if (X.rows() == 0) return 0.0;
  const auto pred = predict_class(fit, X);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hit += pred[i] == y[static_cast<Eigen::Index>(i)] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(pred.size());
}

/// Multinomial propagation model with dissipation as the reference
/// outcome. Majority down-sampling does not apply to this model.
inline ModelRun fit_propagation_model(const features::FeatureTable & table, ModelConfig cfg)
{
  cfg.preprocess.downsample_ratio = 0.0;
  const auto prep = preprocess(table, cfg.preprocess);
  std::vector<std::size_t> cols = all_columns(prep.names.size());
  std::vector<SelectionStep> trace;
  if (cfg.select) {
    auto sel = select_variables(
      prep.train_x, prep.names, multinomial_fitter(prep.train_x, prep.train_y), cfg.protocol);
    cols = sel.survivors;
    trace = std::move(sel.trace);
  }
  std::vector<std::string> names;
  for (auto c : cols) names.push_back(prep.names[c]);
  const Eigen::MatrixXd tx = take_columns(prep.train_x, cols);
  const Eigen::MatrixXd vx = take_columns(prep.valid_x, cols);
  ModelRun run;
  run.fit = fit_multinomial(tx, prep.train_y, names);
  run.fit.selection = std::move(trace);
  run.fit.seed = cfg.preprocess.seed;
  run.fit.train_accuracy = accuracy(run.fit, tx, prep.train_y);
  run.fit.validation_accuracy = accuracy(run.fit, vx, prep.valid_y);
  run.n_train = static_cast<std::size_t>(tx.rows());
  run.n_valid = static_cast<std::size_t>(vx.rows());
  run.rows_after_downsample = prep.rows_after_downsample;
  return run;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__MODELS_HPP_
