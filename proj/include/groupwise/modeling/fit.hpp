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

#ifndef GROUPWISE__MODELING__FIT_HPP_
#define GROUPWISE__MODELING__FIT_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/modeling/metrics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace groupwise::modeling
{

inline constexpr const char * kIntercept = "(intercept)";

struct Coefficient
{
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double z = 0.0;
  double p = 1.0;
};

/// Coefficients of one non-reference outcome; the intercept comes first.
struct ClassBlock
{
  int label = 1;
  std::vector<Coefficient> coefficients;
};

struct SelectionStep
{
  std::string variable;
  std::string reason;  // insignificant | correlated | backward_aic | vif
  double value = 0.0;  // p-value, |r|, AIC after removal, or VIF
};

struct ModelFit
{
  std::vector<std::string> variables;  // columns of the fitted design, intercept excluded
  std::vector<ClassBlock> blocks;
  int reference_label = 0;
  double log_likelihood = 0.0;
  double aic = 0.0;
  std::size_t n = 0;
  int iterations = 0;
  bool converged = false;
  bool separation = false;
  std::vector<double> ll_trace;
  std::vector<std::string> dropped_constant;
  std::vector<std::string> warnings;
  std::vector<SelectionStep> selection;
  std::optional<Metrics> train;
  std::optional<Metrics> validation;
  std::optional<double> train_accuracy;  // multinomial
  std::optional<double> validation_accuracy;
  std::uint64_t seed = 0;

  /// Indices (into the input columns) of the variables actually fitted.
  std::vector<std::size_t> columns;
};

/// Coefficients below this magnitude (on normalized inputs) are taken as a
/// sign of complete or quasi-complete separation.
inline constexpr double kSeparationBound = 30.0;

struct FitOptions
{
  int max_iterations = 100;
  double tolerance = 1e-8;
  double separation_bound = kSeparationBound;
};

/// Columns of X whose range is not (numerically) zero.
inline std::vector<std::size_t> varying_columns(const Eigen::MatrixXd & X)
{
  std::vector<std::size_t> keep;
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    if (X.rows() == 0) break;
    const double lo = X.col(c).minCoeff();
    const double hi = X.col(c).maxCoeff();
    if (hi - lo > 1e-12 * std::max(1.0, std::max(std::abs(lo), std::abs(hi)))) {
      keep.push_back(static_cast<std::size_t>(c));
    }
  }
  return keep;
}

/// [1 | X[:, cols]]
inline Eigen::MatrixXd design(const Eigen::MatrixXd & X, const std::vector<std::size_t> & cols)
{
  Eigen::MatrixXd D(X.rows(), static_cast<Eigen::Index>(cols.size()) + 1);
  D.col(0).setOnes();
  for (std::size_t k = 0; k < cols.size(); ++k) {
    D.col(static_cast<Eigen::Index>(k) + 1) = X.col(static_cast<Eigen::Index>(cols[k]));
  }
  return D;
}

inline void require_full_rank(const Eigen::MatrixXd & D)
{
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
  qr.setThreshold(1e-10);
  if (qr.rank() < D.cols()) {
    throw NumericError(kModule, "design matrix is rank deficient (rank " +
                                  std::to_string(qr.rank()) + " of " +
                                  std::to_string(D.cols()) + ")");
  }
}

/// log(1 + exp(x)) without overflow.
inline double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double sigmoid(double x)
{
  if (x >= 0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__FIT_HPP_
