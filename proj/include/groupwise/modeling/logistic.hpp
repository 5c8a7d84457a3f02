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

#ifndef GROUPWISE__MODELING__LOGISTIC_HPP_
#define GROUPWISE__MODELING__LOGISTIC_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/modeling/fit.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

namespace groupwise::modeling
{

inline double binary_log_likelihood(
  const Eigen::MatrixXd & D, const Eigen::VectorXd & y, const Eigen::VectorXd & beta)
{
  const Eigen::VectorXd eta = D * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y[i] * eta[i] - log1p_exp(eta[i]);
  return ll;
}

/// Maximum-likelihood binary logit by iteratively reweighted least squares
/// with step halving. \p X has no intercept column; constant columns are
/// dropped (and listed) before fitting.
inline ModelFit fit_binary_logistic(
  const Eigen::MatrixXd & X, const Eigen::VectorXi & labels, const std::vector<std::string> & names,
  const FitOptions & opt = {})
{
  if (X.rows() != labels.size()) throw NumericError(kModule, "X and y row counts differ");
  if (X.rows() == 0) throw NumericError(kModule, "empty training data");
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw NumericError(kModule, "binary fit needs 0/1 labels");
  }
  ModelFit fit;
  fit.n = static_cast<std::size_t>(X.rows());
  fit.columns = varying_columns(X);
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (std::find(fit.columns.begin(), fit.columns.end(), static_cast<std::size_t>(c)) ==
        fit.columns.end()) {
      fit.dropped_constant.push_back(names[static_cast<std::size_t>(c)]);
    }
  }
  for (auto c : fit.columns) fit.variables.push_back(names[c]);

  const Eigen::MatrixXd D = design(X, fit.columns);
  require_full_rank(D);
  const Eigen::VectorXd y = labels.cast<double>();
  const Eigen::Index k = D.cols();

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = binary_log_likelihood(D, y, beta);
  fit.ll_trace.push_back(ll);
  Eigen::MatrixXd info(k, k);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd eta = D * beta;
    Eigen::VectorXd p(eta.size());
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = p[i] * (1.0 - p[i]);
    }
    const Eigen::VectorXd grad = D.transpose() * (y - p);
    info = D.transpose() * w.asDiagonal() * D;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      fit.separation = true;
      fit.warnings.push_back("information matrix became singular; likely separation");
      break;
    }
    double new_ll = binary_log_likelihood(D, y, beta + step);
    int halvings = 0;
    while (!(new_ll >= ll) && halvings < 40) {
      step *= 0.5;
      new_ll = binary_log_likelihood(D, y, beta + step);
      ++halvings;
    }
    if (!(new_ll >= ll)) {
      // No ascent left at floating-point resolution: already at the optimum.
      fit.converged = true;
      fit.iterations = it + 1;
      break;
    }
    beta += step;
    ll = new_ll;
    fit.ll_trace.push_back(ll);
    fit.iterations = it + 1;
    if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  {
    const Eigen::VectorXd eta = D * beta;
    Eigen::VectorXd w(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double p = sigmoid(eta[i]);
      w[i] = p * (1.0 - p);
    }
    info = D.transpose() * w.asDiagonal() * D;
  }
  if (beta.cwiseAbs().maxCoeff() > opt.separation_bound) {
    fit.separation = true;
    fit.warnings.push_back("coefficient magnitude above " + std::to_string(opt.separation_bound) +
                           "; likely separation");
  }
  if (!fit.converged) fit.warnings.push_back("IRLS did not converge");

  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(k, k));
  ClassBlock block;
  block.label = 1;
  for (Eigen::Index j = 0; j < k; ++j) {
    Coefficient c;
    c.name = j == 0 ? kIntercept : fit.variables[static_cast<std::size_t>(j - 1)];
    c.estimate = beta[j];
    c.std_error = std::sqrt(std::max(0.0, cov(j, j)));
    c.z = c.std_error > 0 ? c.estimate / c.std_error : 0.0;
    c.p = stats::two_sided_p(c.z);
    block.coefficients.push_back(c);
  }
  fit.blocks.push_back(std::move(block));
  fit.log_likelihood = ll;
  fit.aic = 2.0 * static_cast<double>(k) - 2.0 * ll;
  return fit;
}

/// P(y = 1) for each row of \p X (same column layout the fit was given).
inline Eigen::VectorXd predict_binary(const ModelFit & fit, const Eigen::MatrixXd & X)
{
  const auto & coef = fit.blocks.at(0).coefficients;
  Eigen::VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double eta = coef[0].estimate;
    for (std::size_t k = 0; k < fit.columns.size(); ++k) {
      eta += coef[k + 1].estimate * X(i, static_cast<Eigen::Index>(fit.columns[k]));
    }
    out[i] = sigmoid(eta);
  }
  return out;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__LOGISTIC_HPP_
