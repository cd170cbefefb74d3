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

#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas/market.hpp"
#include "atlas/numeric.hpp"
#include "atlas/ols.hpp"
#include "atlas/panel.hpp"
#include "atlas/qdgmm.hpp"
#include "atlas/shiftshare.hpp"

namespace atlas::report {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Pretty-printed JSON with a trailing newline.
std::string dump(const Json& j);

/// Non-finite doubles become null.
Json number(double v);

Json drop_summary(const panel::DropLog& drops);

Json to_json(const ols::EstimateReport& r);
Json to_json(const ols::WaldResult& w);
Json to_json(const qdgmm::QDEstimate& e);
Json to_json(const shiftshare::FirstStage& fs);
Json to_json(const shiftshare::HansenJ& j);
Json to_json(const shiftshare::IvResult& r);
Json to_json(const market::AsymmetryReport& a);
Json to_json(const panel::CorrelationResult& c);

/// Wraps a payload with schema_version and kind.
Json envelope(const std::string& kind, Json payload);

struct TableStyle {
  int decimals = 3;
  bool hide_intercept = true;
  bool hide_periods = true;  // replaced by an "FE: year" row
  bool periods_first = false;
};

/// Side-by-side coefficient table: estimate with stars over the standard
/// error in parentheses, then Num.Obs., R2, R2 Adj., RMSE, clustering.
std::string regression_table(const std::vector<const ols::EstimateReport*>& columns,
                             const std::string& title, const TableStyle& style = {});

/// Method-of-moments layout: period trends first, four decimals.
std::string qd_table(const std::vector<const qdgmm::QDEstimate*>& columns, const std::string& title);

/// Restricted and unrestricted residual df per column, then Df, Chisq, p.
std::string wald_table(const std::vector<std::pair<std::string, ols::WaldResult>>& rows);

struct CorrelationRow {
  int year = 0;
  panel::CorrelationResult raw;
  panel::CorrelationResult logged;
};
std::string correlation_table(const std::vector<CorrelationRow>& rows, const std::string& title);

std::string summary_table(const std::vector<panel::SummaryRow>& rows,
                          const std::vector<std::string>& variables, const std::string& title);

std::string first_stage_table(const shiftshare::IvResult& result);

/// "a <delta> change in <label> moves the expected outcome by <b*delta> log
/// points (<percent>%)".
std::string semi_elasticity_note(double coefficient, double delta, const std::string& label);

std::string legend(StarLegend which);

void write_margins_csv(const std::vector<ols::MarginsPoint>& curve, std::ostream& out);
void write_market_csv(const std::vector<market::PeriodRecord>& periods, std::ostream& out);

}  // namespace atlas::report
