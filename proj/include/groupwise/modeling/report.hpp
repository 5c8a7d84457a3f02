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

#ifndef GROUPWISE__MODELING__REPORT_HPP_
#define GROUPWISE__MODELING__REPORT_HPP_

#include "groupwise/core/csv.hpp"
#include "groupwise/modeling/fit.hpp"
#include "groupwise/modeling/models.hpp"
#include "groupwise/risk.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>

namespace groupwise::modeling
{

inline std::string format_p(double p) { return p < 0.001 ? "<0.001" : csv::fixed(p, 3); }

inline std::string pad(const std::string & s, std::size_t w, bool right = true)
{
  if (s.size() >= w) return s;
  return right ? std::string(w - s.size(), ' ') + s : s + std::string(w - s.size(), ' ');
}

/// Coefficient rows ordered by |estimate| descending, intercept last.
inline std::vector<Coefficient> table_order(const ClassBlock & b)
{
  std::vector<Coefficient> rows(b.coefficients.begin() + 1, b.coefficients.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto & x, const auto & y) {
    return std::abs(x.estimate) > std::abs(y.estimate);
  });
  rows.push_back(b.coefficients.front());
  return rows;
}

inline void write_coefficients(std::ostream & out, const ClassBlock & b, const std::string & lead)
{
  for (const auto & c : table_order(b)) {
    out << pad(lead, 14, false) << pad(c.name, 22, false) << pad(csv::fixed(c.estimate, 3), 10)
        << pad(csv::fixed(c.std_error, 3), 12) << pad(csv::fixed(c.z, 3), 10)
        << pad(format_p(c.p), 10) << '\n';
  }
}

inline void write_text_report(std::ostream & out, const std::string & title, const ModelRun & run)
{
  const auto & fit = run.fit;
  out << title << '\n';
  out << "n_train = " << run.n_train << ", n_validation = " << run.n_valid << ", seed = " << fit.seed
      << '\n';
  out << pad("", 14, false) << pad("Variables", 22, false) << pad("Coef.", 10)
      << pad("Std. Error", 12) << pad("Z value", 10) << pad("P value", 10) << '\n';
  const bool multi = fit.train_accuracy.has_value();
  for (const auto & b : fit.blocks) {
    const std::string lead =
      multi ? std::string(risk::to_string(static_cast<risk::PropagationPattern>(b.label))) : "";
    write_coefficients(out, b, lead);
  }
  out << "log-likelihood = " << csv::fixed(fit.log_likelihood, 3) << ", AIC = "
      << csv::fixed(fit.aic, 3) << ", iterations = " << fit.iterations
      << (fit.converged ? "" : " (not converged)") << '\n';
  if (fit.train && fit.validation) {
    out << pad("", 14, false) << pad("AUC", 8) << pad("TPR", 8) << pad("TNR", 8) << pad("ACC", 8)
        << '\n';
    auto row = [&](const char * name, const Metrics & m) {
      out << pad(name, 14, false) << pad(csv::fixed(m.auc, 3), 8) << pad(csv::fixed(m.tpr, 3), 8)
          << pad(csv::fixed(m.tnr, 3), 8) << pad(csv::fixed(m.acc, 3), 8) << '\n';
    };
    row("Training", *fit.train);
    row("Validation", *fit.validation);
  }
  if (multi) {
    out << "accuracy: training " << csv::fixed(*fit.train_accuracy, 3) << ", validation "
        << csv::fixed(*fit.validation_accuracy, 3) << '\n';
  }
  if (!fit.selection.empty()) {
    out << "selection trace:\n";
    for (const auto & s : fit.selection) {
      out << "  - " << s.variable << " (" << s.reason << ", " << csv::fmt(s.value) << ")\n";
    }
  }
  for (const auto & w : fit.warnings) out << "warning: " << w << '\n';
}

inline nlohmann::json metrics_json(const Metrics & m)
{
  return {{"auc", m.auc}, {"tpr", m.tpr}, {"tnr", m.tnr}, {"acc", m.acc}};
}

/// Finite-only JSON number: non-finite values become null.
inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json report_json(const ModelRun & run, const std::string & model, nlohmann::json config)
{
  const auto & fit = run.fit;
  nlohmann::json j;
  j["model"] = model;
  j["seed"] = fit.seed;
  j["config"] = std::move(config);
  j["n_train"] = run.n_train;
  j["n_validation"] = run.n_valid;
  j["reference_label"] = fit.reference_label;
  j["variables"] = fit.variables;
  j["dropped_constant"] = fit.dropped_constant;
  nlohmann::json classes = nlohmann::json::array();
  for (const auto & b : fit.blocks) {
    nlohmann::json cj;
    cj["label"] = b.label;
    if (fit.train_accuracy) {
      cj["name"] = std::string(risk::to_string(static_cast<risk::PropagationPattern>(b.label)));
    }
    nlohmann::json coefs = nlohmann::json::array();
    for (const auto & c : b.coefficients) {
      coefs.push_back({{"name", c.name}, {"estimate", num(c.estimate)}, {"std_error", num(c.std_error)},
                       {"z", num(c.z)}, {"p", num(c.p)}});
    }
    cj["coefficients"] = std::move(coefs);
    classes.push_back(std::move(cj));
  }
  j["classes"] = std::move(classes);
  j["log_likelihood"] = num(fit.log_likelihood);
  j["aic"] = num(fit.aic);
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["separation_warning"] = fit.separation;
  j["warnings"] = fit.warnings;
  nlohmann::json trace = nlohmann::json::array();
  for (const auto & s : fit.selection) {
    trace.push_back({{"variable", s.variable}, {"reason", s.reason}, {"value", num(s.value)}});
  }
  j["selection_trace"] = std::move(trace);
  nlohmann::json metrics = nlohmann::json::object();
  if (fit.train) metrics["train"] = metrics_json(*fit.train);
  if (fit.validation) metrics["validation"] = metrics_json(*fit.validation);
  if (fit.train_accuracy) metrics["train"] = {{"acc", *fit.train_accuracy}};
  if (fit.validation_accuracy) metrics["validation"] = {{"acc", *fit.validation_accuracy}};
  j["metrics"] = std::move(metrics);
  return j;
}

}  // namespace groupwise::modeling

#endif  // GROUPWISE__MODELING__REPORT_HPP_
