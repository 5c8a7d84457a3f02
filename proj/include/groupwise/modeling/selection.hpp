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

#ifndef GROUPWISE__MODELING__SELECTION_HPP_
#define GROUPWISE__MODELING__SELECTION_HPP_

#include "groupwise/core/error.hpp"
#include "groupwise/core/stats.hpp"
#include "groupwise/modeling/fit.hpp"
#include "groupwise/modeling/logistic.hpp"
#include "groupwise/modeling/multinomial.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace groupwise::modeling
{

struct SelectionProtocol
{
  double significance = 0.05;
  double correlation = 0.4;
  double vif = 5.0;
};

/// What the selection stages need from a fitted candidate model.
struct FitSummary
{
  double aic = 0.0;
  std::vector<double> p_values;  // per requested column; min over outcome blocks
};

/// Fits a model on the given subset of columns of X.
using SubsetFitter =
  std::function<FitSummary(const std::vector<std::size_t> & cols)>;

inline FitSummary summarize(const ModelFit & fit, const std::vector<std::size_t> & cols)
{
  FitSummary s;
  s.aic = fit.aic;
  s.p_values.assign(cols.size(), 1.0);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    // fit.columns index into the subset matrix.
    const auto it = std::find(fit.columns.begin(), fit.columns.end(), k);
    if (it == fit.columns.end()) continue;
    const auto pos = static_cast<std::size_t>(it - fit.columns.begin()) + 1;
    for (const auto & b : fit.blocks) s.p_values[k] = std::min(s.p_values[k], b.coefficients[pos].p);
  }
  return s;
}

inline Eigen::MatrixXd take_columns(const Eigen::MatrixXd & X, const std::vector<std::size_t> & cols)
{
  Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t k = 0; k < cols.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = X.col(static_cast<Eigen::Index>(cols[k]));
  }
  return out;
}

inline SubsetFitter binary_fitter(const Eigen::MatrixXd & X, const Eigen::VectorXi & y)
{
  return [&X, &y](const std::vector<std::size_t> & cols) {
    const auto sub = take_columns(X, cols);
    const auto fit = fit_binary_logistic(sub, y, std::vector<std::string>(cols.size(), "x"));
    return summarize(fit, cols);
  };
}

inline SubsetFitter multinomial_fitter(const Eigen::MatrixXd & X, const Eigen::VectorXi & y)
{
  return [&X, &y](const std::vector<std::size_t> & cols) {
    const auto sub = take_columns(X, cols);
    const auto fit = fit_multinomial(sub, y, std::vector<std::string>(cols.size(), "x"));
    return summarize(fit, cols);
  };
}

/// Variance inflation factor of column \p target regressed (OLS with
/// intercept) on \p others.
inline double variance_inflation(
  const Eigen::MatrixXd & X, std::size_t target, const std::vector<std::size_t> & others)
{
  const Eigen::VectorXd y = X.col(static_cast<Eigen::Index>(target));
  const Eigen::MatrixXd D = design(X, others);
  const Eigen::VectorXd beta = D.colPivHouseholderQr().solve(y);
  const Eigen::VectorXd resid = y - D * beta;
  const double ss_res = resid.squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  if (ss_tot <= 0.0) return std::numeric_limits<double>::infinity();
  const double r2 = 1.0 - ss_res / ss_tot;
  if (r2 >= 1.0 - 1e-14) return std::numeric_limits<double>::infinity();
  return 1.0 / (1.0 - r2);
}

struct SelectionResult
{
  std::vector<std::size_t> survivors;  // column indices, ascending
  std::vector<SelectionStep> trace;
};

class SelectionError : public NumericError
{
public:
  SelectionError(const std::string & what, std::vector<SelectionStep> trace)
  : NumericError(kModule, what), trace_(std::move(trace))
  {
  }
  const std::vector<SelectionStep> & trace() const { return trace_; }

private:
  std::vector<SelectionStep> trace_;
};

/// Four-stage variable selection:
///   1. drop variables whose univariate model gives Wald p >= significance;
///   2. for pairs with |Pearson r| > correlation, in descending |r|, drop the
///      one whose univariate model has the higher AIC;
///   3. backward elimination on AIC;
///   4. while the largest VIF exceeds the limit, drop that variable (ties go
///      to the higher univariate AIC).
inline SelectionResult select_variables(
  const Eigen::MatrixXd & X, const std::vector<std::string> & names, const SubsetFitter & fit,
  const SelectionProtocol & protocol = {})
{
  const std::size_t p = static_cast<std::size_t>(X.cols());
  SelectionResult res;
  std::vector<double> uni_aic(p, std::numeric_limits<double>::infinity());
  std::vector<bool> alive(p, false);

  for (std::size_t c = 0; c < p; ++c) {
    double pv = 1.0;
    try {
      const auto s = fit({c});
      uni_aic[c] = s.aic;
      pv = s.p_values[0];
    } catch (const NumericError &) {
      pv = 1.0;
    }
    if (pv >= protocol.significance || !std::isfinite(pv)) {
      res.trace.push_back({names[c], "insignificant", pv});
    } else {
      alive[c] = true;
    }
  }

  struct Pair
  {
    double r;
    std::size_t a;
    std::size_t b;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < p; ++a) {
    if (!alive[a]) continue;
    for (std::size_t b = a + 1; b < p; ++b) {
      if (!alive[b]) continue;
      Eigen::VectorXd ca = X.col(static_cast<Eigen::Index>(a));
      Eigen::VectorXd cb = X.col(static_cast<Eigen::Index>(b));
      const double r = std::abs(stats::pearson(
        std::span<const double>(ca.data(), static_cast<std::size_t>(ca.size())),
        std::span<const double>(cb.data(), static_cast<std::size_t>(cb.size()))));
      if (r > protocol.correlation) pairs.push_back({r, a, b});
    }
  }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair & x, const Pair & y) { return x.r > y.r; });
  for (const auto & pr : pairs) {
    if (!alive[pr.a] || !alive[pr.b]) continue;
    const auto drop = uni_aic[pr.b] >= uni_aic[pr.a] ? pr.b : pr.a;
    alive[drop] = false;
    res.trace.push_back({names[drop], "correlated", pr.r});
  }

  std::vector<std::size_t> cur;
  for (std::size_t c = 0; c < p; ++c) {
    if (alive[c]) cur.push_back(c);
  }
  if (!cur.empty()) {
    double cur_aic = fit(cur).aic;
    while (!cur.empty()) {
      double best_aic = cur_aic;
      std::optional<std::size_t> best;
      for (std::size_t k = 0; k < cur.size(); ++k) {
        auto trial = cur;
        trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
        double aic = 0.0;
        try {
          aic = fit(trial).aic;
        } catch (const NumericError &) {
          continue;
        }
        if (aic < best_aic) {
          best_aic = aic;
          best = k;
        }
      }
      if (!best) break;
      res.trace.push_back({names[cur[*best]], "backward_aic", best_aic});
      cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(*best));
      cur_aic = best_aic;
    }
  }

  while (cur.size() >= 2) {
    double worst = -1.0;
    std::size_t at = 0;
    for (std::size_t k = 0; k < cur.size(); ++k) {
      auto others = cur;
      others.erase(others.begin() + static_cast<std::ptrdiff_t>(k));
      const double v = variance_inflation(X, cur[k], others);
      if (v > worst || (v == worst && uni_aic[cur[k]] > uni_aic[cur[at]])) {
        worst = v;
        at = k;
      }
    }
    if (!(worst > protocol.vif)) break;
    res.trace.push_back({names[cur[at]], "vif", worst});
    cur.erase(cur.begin() + static_cast<std::ptrdiff_t>(at));
  }

  if (cur.empty()) {
    std::string msg = "variable selection removed every candidate:";
    for (const auto & s : res.trace) msg += " " + s.variable + "(" + s.reason + ")";
    throw SelectionError(msg, res.trace);
  }
  res.survivors = cur;
  return res;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__SELECTION_HPP_
