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

#ifndef GROUPWISE__MODELING__MULTINOMIAL_HPP_
#define GROUPWISE__MODELING__MULTINOMIAL_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/modeling/fit.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace groupwise::modeling
{

struct MultinomialOptions
{
  int max_iterations = 100;
  double tolerance = 1e-6;
  double separation_bound = kSeparationBound;
  std::size_t min_class_rows = 10;
};

/// Row-wise class probabilities, reference class in column 0. \p B holds one
/// coefficient column per non-reference class.
inline Eigen::MatrixXd softmax_probabilities(const Eigen::MatrixXd & D, const Eigen::MatrixXd & B)
{
  const Eigen::MatrixXd eta = D * B;
  Eigen::MatrixXd P(D.rows(), B.cols() + 1);
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < eta.cols(); ++j) m = std::max(m, eta(i, j));
    double z = std::exp(-m);
    for (Eigen::Index j = 0; j < eta.cols(); ++j) z += std::exp(eta(i, j) - m);
    P(i, 0) = std::exp(-m) / z;
    for (Eigen::Index j = 0; j < eta.cols(); ++j) P(i, j + 1) = std::exp(eta(i, j) - m) / z;
  }
  return P;
}

inline double multinomial_log_likelihood(
  const Eigen::MatrixXd & D, const std::vector<Eigen::Index> & cls, const Eigen::MatrixXd & B)
{
  const Eigen::MatrixXd eta = D * B;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    double m = 0.0;
    for (Eigen::Index j = 0; j < eta.cols(); ++j) m = std::max(m, eta(i, j));
    double z = std::exp(-m);
    for (Eigen::Index j = 0; j < eta.cols(); ++j) z += std::exp(eta(i, j) - m);
    const double own = cls[static_cast<std::size_t>(i)] == 0 ? 0.0 : eta(i, cls[static_cast<std::size_t>(i)] - 1);
    ll += own - m - std::log(z);
  }
  return ll;
}

/// Maximum-likelihood multinomial logit by Newton's method with step
/// halving. The reference outcome is label 0 when present (otherwise the
/// smallest label). Also accepts two classes, where it reduces to the
/// binary logit.
inline ModelFit fit_multinomial(
  const Eigen::MatrixXd & X, const Eigen::VectorXi & labels, const std::vector<std::string> & names,
  const MultinomialOptions & opt = {})
{
  if (X.rows() != labels.size()) throw NumericError(kModule, "X and y row counts differ");
  std::map<int, std::size_t> counts;
  for (Eigen::Index i = 0; i < labels.size(); ++i) ++counts[labels[i]];
  if (counts.size() < 2) throw NumericError(kModule, "multinomial fit needs at least two classes");
  for (const auto & [lab, n] : counts) {
    if (n < opt.min_class_rows) {
      throw DataError(kModule, "class " + std::to_string(lab) + " has only " + std::to_string(n) +
                                 " rows (need " + std::to_string(opt.min_class_rows) + ")");
    }
  }
  std::vector<int> classes;
  for (const auto & [lab, n] : counts) classes.push_back(lab);  // ascending; 0 first if present

  ModelFit fit;
  fit.n = static_cast<std::size_t>(X.rows());
  fit.reference_label = classes.front();
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

  std::vector<Eigen::Index> cls(static_cast<std::size_t>(labels.size()));
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    cls[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(
      std::lower_bound(classes.begin(), classes.end(), labels[i]) - classes.begin());
  }
  const Eigen::Index p = D.cols();
  const Eigen::Index m = static_cast<Eigen::Index>(classes.size()) - 1;
  const Eigen::Index dim = p * m;
  Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(D.rows(), m);
  for (Eigen::Index i = 0; i < D.rows(); ++i) {
    if (cls[static_cast<std::size_t>(i)] > 0) Y(i, cls[static_cast<std::size_t>(i)] - 1) = 1.0;
  }

  // Parameters are stacked class by class: theta[j * p + r] = B(r, j).
  auto information = [&](const Eigen::MatrixXd & P) {
    Eigen::MatrixXd H(dim, dim);
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index k = j; k < m; ++k) {
        Eigen::VectorXd w(D.rows());
        for (Eigen::Index i = 0; i < D.rows(); ++i) {
          const double pj = P(i, j + 1);
          const double pk = P(i, k + 1);
          w[i] = j == k ? pj * (1.0 - pj) : -pj * pk;
        }
        const Eigen::MatrixXd blk = D.transpose() * w.asDiagonal() * D;
        H.block(j * p, k * p, p, p) = blk;
        H.block(k * p, j * p, p, p) = blk.transpose();
      }
    }
    return H;
  };

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(p, m);
  double ll = multinomial_log_likelihood(D, cls, B);
  fit.ll_trace.push_back(ll);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Eigen::MatrixXd P = softmax_probabilities(D, B);
    const Eigen::MatrixXd G = D.transpose() * (Y - P.rightCols(m));
    Eigen::VectorXd grad(dim);
    for (Eigen::Index j = 0; j < m; ++j) grad.segment(j * p, p) = G.col(j);
    const Eigen::MatrixXd H = information(P);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step = ldlt.solve(grad);
    if (ldlt.info() != Eigen::Success || !step.allFinite()) {
      fit.separation = true;
      fit.warnings.push_back("information matrix became singular; likely separation");
      break;
    }
    auto as_matrix = [&](const Eigen::VectorXd & v) {
      Eigen::MatrixXd S(p, m);
      for (Eigen::Index j = 0; j < m; ++j) S.col(j) = v.segment(j * p, p);
      return S;
    };
    double new_ll = multinomial_log_likelihood(D, cls, B + as_matrix(step));
    int halvings = 0;
    while (!(new_ll >= ll) && halvings < 40) {
      step *= 0.5;
      new_ll = multinomial_log_likelihood(D, cls, B + as_matrix(step));
      ++halvings;
    }
    if (!(new_ll >= ll)) {
      // No ascent left at floating-point resolution: already at the optimum.
      fit.converged = true;
      fit.iterations = it + 1;
      break;
    }
    B += as_matrix(step);
    ll = new_ll;
    fit.ll_trace.push_back(ll);
    fit.iterations = it + 1;
    if (step.cwiseAbs().maxCoeff() < opt.tolerance) {
      fit.converged = true;
      break;
    }
  }
  if (B.cwiseAbs().maxCoeff() > opt.separation_bound) {
    fit.separation = true;
    fit.warnings.push_back("coefficient magnitude above " + std::to_string(opt.separation_bound) +
                           "; likely separation");
  }
  if (!fit.converged) fit.warnings.push_back("Newton iterations did not converge");

  const Eigen::MatrixXd H = information(softmax_probabilities(D, B));
  const Eigen::MatrixXd cov = H.ldlt().solve(Eigen::MatrixXd::Identity(dim, dim));
  for (Eigen::Index j = 0; j < m; ++j) {
    ClassBlock block;
    block.label = classes[static_cast<std::size_t>(j) + 1];
    for (Eigen::Index r = 0; r < p; ++r) {
      Coefficient c;
      c.name = r == 0 ? kIntercept : fit.variables[static_cast<std::size_t>(r - 1)];
      c.estimate = B(r, j);
      const double var = cov(j * p + r, j * p + r);
      c.std_error = std::sqrt(std::max(0.0, var));
      c.z = c.std_error > 0 ? c.estimate / c.std_error : 0.0;
      c.p = stats::two_sided_p(c.z);
      block.coefficients.push_back(c);
    }
    fit.blocks.push_back(std::move(block));
  }
  fit.log_likelihood = ll;
  fit.aic = 2.0 * static_cast<double>(dim) - 2.0 * ll;
  return fit;
}

/// Class probabilities per row; column 0 is the reference class, then the
/// blocks in order.
inline Eigen::MatrixXd predict_multinomial(const ModelFit & fit, const Eigen::MatrixXd & X)
{
  const Eigen::Index p = static_cast<Eigen::Index>(fit.columns.size()) + 1;
  Eigen::MatrixXd B(p, static_cast<Eigen::Index>(fit.blocks.size()));
  for (std::size_t j = 0; j < fit.blocks.size(); ++j) {
    for (Eigen::Index r = 0; r < p; ++r) {
      B(r, static_cast<Eigen::Index>(j)) = fit.blocks[j].coefficients[static_cast<std::size_t>(r)].estimate;
    }
  }
  return softmax_probabilities(design(X, fit.columns), B);
}

/// Label of the most probable class per row.
inline std::vector<int> predict_class(const ModelFit & fit, const Eigen::MatrixXd & X)
{
  const Eigen::MatrixXd P = predict_multinomial(fit, X);
  std::vector<int> out;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    Eigen::Index best = 0;
    P.row(i).maxCoeff(&best);
    out.push_back(best == 0 ? fit.reference_label : fit.blocks[static_cast<std::size_t>(best - 1)].label);
  }
  return out;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__MULTINOMIAL_HPP_
