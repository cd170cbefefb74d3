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
#include "atlas/panel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "atlas/csv.hpp"
#include "atlas/error.hpp"
#include "atlas/numeric.hpp"

namespace atlas::panel {

namespace {

// Variables stored as percentages in the raw extracts.
const std::set<std::string>& percentage_variables() {
  static const std::set<std::string> vars{"pct_public_assistance", "unemployment_rate",
                                          "vacancy_rate"};
  return vars;
}

const std::set<std::string>& count_variables() {
  static const std::set<std::string> vars{"chronic_count", "population", "adult_population",
                                          "crowded_units", "total_units", "employment"};
  return vars;
}

}  // namespace

std::optional<double> RawSeries::get(const std::string& msa, int year,
                                     const std::string& variable) const {
  auto m = values.find(msa);
  if (m == values.end()) return std::nullopt;
  auto y = m->second.find(year);
  if (y == m->second.end()) return std::nullopt;
  auto v = y->second.find(variable);
  if (v == y->second.end()) return std::nullopt;
  return v->second;
}

void RawSeries::set(const std::string& msa, int year, const std::string& variable, double value) {
  values[msa][year][variable] = value;
  variables.insert(variable);
}

RawSeries read_series_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  table.require_columns({"msa_id", "year"});
  const auto c_msa = table.column("msa_id");
  const auto c_year = table.column("year");
  RawSeries series;
  for (std::size_t c = 0; c < table.header().size(); ++c) {
    if (c != c_msa && c != c_year) series.variables.insert(table.header()[c]);
  }
  for (std::size_t r = 0; r < table.size(); ++r) {
    const std::string& msa = table.cell(r, c_msa);
    const int year = static_cast<int>(table.integer(r, c_year));
    auto& slot = series.values[msa][year];
    for (std::size_t c = 0; c < table.header().size(); ++c) {
      if (c == c_msa || c == c_year) continue;
      if (auto v = table.optional_number(r, c)) slot[table.header()[c]] = *v;
    }
  }
  validate(series);
  return series;
}

void validate(const RawSeries& series) {
  for (const auto& [msa, years] : series.values) {
    for (const auto& [year, vars] : years) {
      for (const auto& [name, v] : vars) {
        const std::string where =
            "MSA '" + msa + "' year " + std::to_string(year) + " variable '" + name + "'";
        if (!std::isfinite(v)) throw DataError(where + ": non-finite value");
        if (count_variables().count(name) && v < 0.0) throw DataError(where + ": negative count");
        if (percentage_variables().count(name) && (v < 0.0 || v > 100.0)) {
          throw DataError(where + ": percentage outside [0, 100]");
        }
      }
    }
  }
}

DeflatorTable read_deflator_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  table.require_columns({"year", "deflator"});
  DeflatorTable out;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const double d = table.number(r, table.column("deflator"));
    if (!(d > 0.0)) throw DataError(path.string() + ": nonpositive deflator");
    out[static_cast<int>(table.integer(r, table.column("year")))] = d;
  }
  return out;
}

double deflate(double nominal, double deflator) {
  if (!(deflator > 0.0) || !std::isfinite(deflator)) {
    throw DataError("deflator must be positive, got " + format_double(deflator));
  }
  return nominal / deflator;
}

Split piecewise_split(double delta) {
  if (delta > 0.0) return {delta, 0.0};
  if (delta < 0.0) return {0.0, delta};
  return {0.0, 0.0};
}

std::string display_label(const VariableSpec& spec) {
  if (!spec.label.empty()) return spec.label;
  return std::string("Δ ") + (spec.transform == Transform::kLog ? "log " : "") + spec.variable;
}

std::optional<double> crowded_rate(double crowded_units, double total_units) {
  if (!(total_units > 0.0)) return std::nullopt;
  return crowded_units / total_units;
}

std::optional<double> resolve(const RawSeries& series, const std::string& msa, int year,
                              const std::string& variable, const DerivedOptions& options,
                              std::string* reason) {
  auto fail = [&](std::string why) -> std::optional<double> {
    if (reason) *reason = std::move(why);
    return std::nullopt;
  };
  if (auto v = series.get(msa, year, variable)) return v;
  if (series.variables.count(variable)) {
    return fail("missing year (" + variable + ", " + std::to_string(year) + ")");
  }
  if (variable == "chronic_rate") {
    auto count = series.get(msa, year, "chronic_count");
    auto pop = series.get(msa, year, options.chronic_denominator);
    if (!count || !pop) {
      return fail("missing year (" + variable + ", " + std::to_string(year) + ")");
    }
    if (!(*pop > 0.0)) return fail("zero population (" + std::to_string(year) + ")");
    return *count / *pop;
  }
  if (variable == "crowded_rate") {
    auto crowded = series.get(msa, year, "crowded_units");
    auto total = series.get(msa, year, "total_units");
    if (!crowded || !total) {
      return fail("missing year (" + variable + ", " + std::to_string(year) + ")");
    }
    auto rate = crowded_rate(*crowded, *total);
    if (!rate) return fail("zero total units (" + std::to_string(year) + ")");
    return rate;
  }
  return fail("unknown variable '" + variable + "'");
}

bool is_available(const RawSeries& series, const std::string& variable,
                  const DerivedOptions& options) {
  if (series.variables.count(variable)) return true;
  if (variable == "chronic_rate") {
    return series.variables.count("chronic_count") &&
           series.variables.count(options.chronic_denominator);
  }
  if (variable == "crowded_rate") {
    return series.variables.count("crowded_units") && series.variables.count("total_units");
  }
  return false;
}

std::string period_label(int t0, int t1) { return std::to_string(t0) + "-" + std::to_string(t1); }

Differences long_difference(const RawSeries& series, const VariableSpec& variable, int t0, int t1,
                            const DeflatorTable* deflators, const DerivedOptions& options,
                            double scale) {
  Differences out;
  const std::string period = period_label(t0, t1);
  double d0 = 1.0;
  double d1 = 1.0;
  if (variable.deflate) {
    if (!deflators) throw ConfigError("variable '" + variable.variable + "' needs a deflator table");
    auto a = deflators->find(t0);
    auto b = deflators->find(t1);
    if (a == deflators->end() || b == deflators->end()) {
      throw ConfigError("deflator table lacks year " + std::to_string(a == deflators->end() ? t0 : t1));
    }
    d0 = a->second;
    d1 = b->second;
  }
  for (const auto& [msa, _] : series.values) {
    std::string reason;
    auto x0 = resolve(series, msa, t0, variable.variable, options, &reason);
    std::optional<double> x1;
    if (x0) x1 = resolve(series, msa, t1, variable.variable, options, &reason);
    if (!x0 || !x1) {
      out.drops.push_back({msa, period, reason});
      continue;
    }
    const double v0 = deflate(*x0, d0) * scale;
    const double v1 = deflate(*x1, d1) * scale;
    if (variable.transform == Transform::kLog) {
      if (!(v0 > 0.0) || !(v1 > 0.0)) {
        out.drops.push_back(
            {msa, period,
             "nonpositive under log (" + variable.variable + ", " +
                 std::to_string(!(v0 > 0.0) ? t0 : t1) + ")"});
        continue;
      }
      out.delta[msa] = std::log(v1) - std::log(v0);
    } else {
      out.delta[msa] = v1 - v0;
    }
    out.levels[msa] = {v0, v1};
  }
  return out;
}

CorrelationResult correlation_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw DataError("correlation_test: series lengths differ (" + std::to_string(x.size()) +
                    " vs " + std::to_string(y.size()) + ")");
  }
  std::vector<double> xs;
  std::vector<double> ys;
  CorrelationResult out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (std::isfinite(x[i]) && std::isfinite(y[i])) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    } else {
      ++out.dropped;
    }
  }
  out.n = xs.size();
  if (out.n < 3) throw DataError("correlation_test: need at least 3 finite pairs");
  const double nn = static_cast<double>(out.n);
  const double mx = kahan_total(xs) / nn;
  const double my = kahan_total(ys) / nn;
  KahanSum sxx;
  KahanSum syy;
  KahanSum sxy;
  for (std::size_t i = 0; i < out.n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx.add(dx * dx);
    syy.add(dy * dy);
    sxy.add(dx * dy);
  }
  if (!(sxx.value() > 0.0) || !(syy.value() > 0.0)) {
    throw DataError("correlation_test: undefined correlation (zero variance)");
  }
  out.r = std::clamp(sxy.value() / std::sqrt(sxx.value() * syy.value()), -1.0, 1.0);
  const double df = nn - 2.0;
  if (std::abs(out.r) >= 1.0) {
    out.t = std::copysign(std::numeric_limits<double>::infinity(), out.r);
    out.p = 0.0;
  } else {
    out.t = out.r * std::sqrt(df / (1.0 - out.r * out.r));
    out.p = student_t_two_sided_p(out.t, df);
  }
  out.stars = significance_stars(out.p, StarLegend::kCorrelation);
  return out;
}

std::vector<SummaryRow> summary_stats(const RawSeries& series,
                                      const std::vector<std::string>& variables,
                                      const std::vector<int>& years,
                                      const DerivedOptions& options) {
  std::vector<SummaryRow> out;
  for (int year : years) {
    SummaryRow row;
    row.year = year;
    std::vector<KahanSum> sums(variables.size());
    std::vector<KahanSum> log_sums(variables.size());
    row.log_counts.assign(variables.size(), 0);
    for (const auto& [msa, _] : series.values) {
      std::vector<double> vals;
      for (const auto& v : variables) {
        auto x = resolve(series, msa, year, v, options, nullptr);
        if (!x) break;
        vals.push_back(*x);
      }
      if (vals.size() != variables.size()) continue;
      ++row.count;
      for (std::size_t j = 0; j < vals.size(); ++j) {
        sums[j].add(vals[j]);
        if (vals[j] > 0.0) {
          log_sums[j].add(std::log(vals[j]));
          ++row.log_counts[j];
        }
      }
    }
    for (std::size_t j = 0; j < variables.size(); ++j) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.means.push_back(row.count ? sums[j].value() / static_cast<double>(row.count) : nan);
      row.log_means.push_back(row.log_counts[j]
                                  ? log_sums[j].value() / static_cast<double>(row.log_counts[j])
                                  : nan);
    }
    out.push_back(std::move(row));
  }
  return out;
}

Panel build_panel(const RawSeries& series, const SpecConfig& spec, const DeflatorTable* deflators) {
  if (spec.periods.empty()) throw ConfigError("spec '" + spec.name + "': no periods");
  std::vector<const VariableSpec*> vars{&spec.outcome, &spec.split};
  for (const auto& c : spec.covariates) vars.push_back(&c);
  for (const auto& a : spec.auxiliary) vars.push_back(&a);
  for (const auto* v : vars) {
    if (!is_available(series, v->variable, spec.derived)) {
      throw ConfigError("spec '" + spec.name + "': unknown variable '" + v->variable + "'");
    }
  }
  for (const auto& [t0, t1] : spec.periods) {
    if (t1 <= t0) {
      throw ConfigError("spec '" + spec.name + "': period " + period_label(t0, t1) +
                        " must end after it starts");
    }
  }

  Panel panel;
  panel.spec = spec;
  const std::size_t n_periods = spec.periods.size();
  for (const auto& [t0, t1] : spec.periods) panel.period_labels.push_back(period_label(t0, t1));

  for (std::size_t p = 0; p < n_periods; ++p) {
    const auto [t0, t1] = spec.periods[p];
    std::vector<Differences> diffs;
    diffs.reserve(vars.size());
    for (std::size_t v = 0; v < vars.size(); ++v) {
      diffs.push_back(long_difference(series, *vars[v], t0, t1, deflators, spec.derived,
                                      v == 0 ? spec.outcome_scale : 1.0));
    }
    std::vector<std::map<std::string, std::string>> reasons(diffs.size());
    for (std::size_t v = 0; v < diffs.size(); ++v) {
      for (const auto& e : diffs[v].drops) reasons[v].emplace(e.msa_id, e.reason);
    }
    for (const auto& [msa, _] : series.values) {
      ++panel.candidates;
      std::string reason;
      for (std::size_t v = 0; v < diffs.size() && reason.empty(); ++v) {
        if (auto it = reasons[v].find(msa); it != reasons[v].end()) reason = it->second;
      }
      if (!reason.empty()) {
        panel.drops.push_back({msa, panel.period_labels[p], reason});
        continue;
      }
      PanelObservation obs;
      obs.msa_id = msa;
      obs.period = panel.period_labels[p];
      obs.t0 = t0;
      obs.t1 = t1;
      obs.period_index = p;
      obs.outcome_delta = diffs[0].delta.at(msa);
      std::tie(obs.outcome_t0, obs.outcome_t1) = diffs[0].levels.at(msa);
      obs.split_delta = diffs[1].delta.at(msa);
      const Split s = piecewise_split(obs.split_delta);
      obs.split_plus = s.plus;
      obs.split_minus = s.minus;
      std::size_t v = 2;
      for (std::size_t c = 0; c < spec.covariates.size(); ++c, ++v) {
        obs.covariates.push_back(diffs[v].delta.at(msa));
      }
      for (std::size_t a = 0; a < spec.auxiliary.size(); ++a, ++v) {
        obs.auxiliary.push_back(diffs[v].delta.at(msa));
      }
      obs.period_dummies.assign(n_periods, 0.0);
      obs.period_dummies[p] = 1.0;
      obs.cluster = msa;
      panel.rows.push_back(std::move(obs));
    }
  }
  std::stable_sort(panel.rows.begin(), panel.rows.end(), [](const auto& a, const auto& b) {
    return a.msa_id != b.msa_id ? a.msa_id < b.msa_id : a.period_index < b.period_index;
  });
  return panel;
}

void write_panel_csv(const Panel& panel, std::ostream& out) {
  const auto& spec = panel.spec;
  std::vector<std::string> header{"msa_id", "period", "outcome_t0", "outcome_t1", "d_outcome",
                                  "d_split", "split_plus", "split_minus"};
  for (const auto& c : spec.covariates) header.push_back("d_" + c.variable);
  for (const auto& a : spec.auxiliary) header.push_back("d_" + a.variable);
  for (const auto& l : panel.period_labels) header.push_back("period_" + l);
  header.push_back("cluster");
  csv::write_row(out, header);
  for (const auto& r : panel.rows) {
    std::vector<std::string> f{r.msa_id,
                               r.period,
                               format_double(r.outcome_t0),
                               format_double(r.outcome_t1),
                               format_double(r.outcome_delta),
                               format_double(r.split_delta),
                               format_double(r.split_plus),
                               format_double(r.split_minus)};
    for (double c : r.covariates) f.push_back(format_double(c));
    for (double a : r.auxiliary) f.push_back(format_double(a));
    for (double d : r.period_dummies) f.push_back(format_double(d));
    f.push_back(r.cluster);
    csv::write_row(out, f);
  }
}

void write_drop_log_csv(const DropLog& drops, std::ostream& out) {
  csv::write_row(out, {"msa_id", "period", "reason"});
  for (const auto& d : drops) csv::write_row(out, {d.msa_id, d.period, d.reason});
}

}  // namespace atlas::panel
