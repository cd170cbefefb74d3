// Copyright 2026 The Metro Homelessness Atlas Authors
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
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace atlas::panel {

/// msa id -> year -> variable -> value. Missing cells are simply absent.
struct RawSeries {
  std::map<std::string, std::map<int, std::map<std::string, double>>> values;
  std::set<std::string> variables;

  std::optional<double> get(const std::string& msa, int year, const std::string& variable) const;
  void set(const std::string& msa, int year, const std::string& variable, double value);
};

/// Wide CSV: msa_id,year,<variable>... ; empty / NA cells are missing.
RawSeries read_series_csv(const std::filesystem::path& path);

/// Counts >= 0 and percentage variables within [0, 100]. Throws DataError.
void validate(const RawSeries& series);

/// year -> price index relative to 1999 (1999 == 1.0).
using DeflatorTable = std::map<int, double>;
DeflatorTable read_deflator_csv(const std::filesystem::path& path);

/// Real 1999 dollars. Throws DataError on a nonpositive deflator.
double deflate(double nominal, double deflator);

struct DropEntry {
  std::string msa_id;
  std::string period;
  std::string reason;
};
using DropLog = std::vector<DropEntry>;

struct Split {
  double plus = 0.0;
  double minus = 0.0;
};

/// plus = max(d, 0), minus = min(d, 0); the knot maps to (0, 0).
Split piecewise_split(double delta);

enum class Transform { kLevel, kLog };

struct VariableSpec {
  std::string variable;
  Transform transform = Transform::kLevel;
  bool deflate = false;
  std::string label;  // display label; defaults to "Δ [log ]variable"
};

std::string display_label(const VariableSpec& spec);

/// Options for the derived rate variables.
struct DerivedOptions {
  /// Denominator column for chronic_rate = chronic_count / denominator.
  std::string chronic_denominator = "population";
};

/// crowded / total; nullopt when total units is zero (caller logs the drop).
std::optional<double> crowded_rate(double crowded_units, double total_units);

/// Value of `variable` for (msa, year), deriving chronic_rate and
/// crowded_rate from their components when the series lacks them. On
/// failure returns nullopt and sets `reason`.
std::optional<double> resolve(const RawSeries& series, const std::string& msa, int year,
                              const std::string& variable, const DerivedOptions& options,
                              std::string* reason);

bool is_available(const RawSeries& series, const std::string& variable,
                  const DerivedOptions& options);

struct Differences {
  std::map<std::string, double> delta;
  std::map<std::string, std::pair<double, double>> levels;  // (x_t0, x_t1) before transform
  DropLog drops;
};

/// f(x_t1) - f(x_t0) per MSA with f = identity or ln. MSAs missing either year
/// are dropped with "missing year"; nonpositive values under log with
/// "nonpositive under log". Deflation (if requested) and `scale` are applied
/// to the levels first.
Differences long_difference(const RawSeries& series, const VariableSpec& variable, int t0, int t1,
                            const DeflatorTable* deflators = nullptr,
                            const DerivedOptions& options = {}, double scale = 1.0);

struct CorrelationResult {
  double r = 0.0;
  double t = 0.0;
  double p = 1.0;
  std::size_t n = 0;
  std::size_t dropped = 0;  // non-finite pairs removed
  std::string stars;
};

/// Pearson r with the Student-t test on n-2 df. Pairwise deletion of
/// non-finite pairs. Throws DataError for n < 3 or zero variance.
CorrelationResult correlation_test(std::span<const double> x, std::span<const double> y);

struct SummaryRow {
  int year = 0;
  std::size_t count = 0;
  std::vector<double> means;
  std::vector<double> log_means;  // over rows with positive values
  std::vector<std::size_t> log_counts;
};

/// Per-year means over MSAs where every listed variable is available.
std::vector<SummaryRow> summary_stats(const RawSeries& series,
                                      const std::vector<std::string>& variables,
                                      const std::vector<int>& years,
                                      const DerivedOptions& options = {});

/// Declarative description of one estimation panel.
struct SpecConfig {
  std::string name;
  std::string title;
  VariableSpec outcome;
  VariableSpec split;
  bool piecewise = true;
  std::vector<VariableSpec> covariates;
  /// Differenced alongside the regressors but not entered in the design
  /// (e.g. employment growth for the IV system).
  std::vector<VariableSpec> auxiliary;
  std::vector<std::pair<int, int>> periods;
  double outcome_scale = 1.0;
  DerivedOptions derived;
  std::string estimator = "ols";  // ols | qd | iv
};

struct PanelObservation {
  std::string msa_id;
  std::string period;
  int t0 = 0;
  int t1 = 0;
  std::size_t period_index = 0;
  double outcome_delta = 0.0;
  double outcome_t0 = 0.0;  // levels after deflation and scaling
  double outcome_t1 = 0.0;
  double split_delta = 0.0;
  double split_plus = 0.0;
  double split_minus = 0.0;
  std::vector<double> covariates;
  std::vector<double> auxiliary;
  std::vector<double> period_dummies;  // one-hot over all periods
  std::string cluster;
};

struct Panel {
  SpecConfig spec;
  std::vector<std::string> period_labels;
  std::vector<PanelObservation> rows;  // sorted by (msa_id, period_index)
  DropLog drops;
  std::size_t candidates = 0;  // MSAs x periods considered
};

std::string period_label(int t0, int t1);

/// One observation per MSA x period; the first drop reason is logged for
/// every candidate that fails. Throws ConfigError for unknown variables.
Panel build_panel(const RawSeries& series, const SpecConfig& spec,
                  const DeflatorTable* deflators = nullptr);

void write_panel_csv(const Panel& panel, std::ostream& out);
void write_drop_log_csv(const DropLog& drops, std::ostream& out);

}  // namespace atlas::panel
