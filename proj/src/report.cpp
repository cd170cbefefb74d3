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
#include "atlas/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "atlas/csv.hpp"
#include "atlas/numeric.hpp"

namespace atlas::report {
namespace {

using Grid = std::vector<std::vector<std::string>>;

// Column 0 left-aligned, the rest right-aligned; an empty row draws a rule.
std::string render(const Grid& grid, const std::string& title, const std::string& footer) {
  std::size_t cols = 0;
  for (const auto& r : grid) cols = std::max(cols, r.size());
  std::vector<std::size_t> width(cols, 0);
  for (const auto& r : grid) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  const std::string rule(total > 2 ? total - 2 : 0, '-');
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  out << rule << '\n';
  for (const auto& r : grid) {
    if (r.empty()) {
      out << rule << '\n';
      continue;
    }
    std::string line;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::string cell = c < r.size() ? r[c] : "";
      const std::string pad(width[c] - cell.size(), ' ');
      if (c > 0) line += "  ";
      line += c == 0 ? cell + pad : pad + cell;
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
  out << rule << '\n';
  if (!footer.empty()) out << footer << '\n';
  return out.str();
}

bool is_period(const std::string& name) { return name.rfind("period_", 0) == 0; }

std::string stars_for(const ols::EstimateReport& r, std::size_t j) {
  return significance_stars(r.p_value(j), StarLegend::kRegression);
}

std::string fixed_or_na(double v, int decimals) {
  return std::isfinite(v) ? format_fixed(v, decimals) : "";
}

}  // namespace

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json drop_summary(const panel::DropLog& drops) {
  std::map<std::string, std::size_t> by_reason;
  for (const auto& d : drops) {
    // Reasons carry detail in parentheses; group on the leading phrase.
    const auto cut = d.reason.find(" (");
    ++by_reason[d.reason.substr(0, cut)];
  }
  Json j;
  j["total"] = drops.size();
  j["by_reason"] = Json::object();
  for (const auto& [reason, n] : by_reason) j["by_reason"][reason] = n;
  return j;
}

Json to_json(const ols::EstimateReport& r) {
  Json j;
  j["label"] = r.label;
  j["estimator"] = r.estimator;
  j["outcome"] = r.outcome;
  j["n"] = r.n;
  j["k"] = r.k;
  j["clusters"] = r.clusters;
  j["cluster_by"] = r.cluster_by;
  j["r2"] = number(r.r2);
  j["adj_r2"] = number(r.adj_r2);
  j["rmse"] = number(r.rmse);
  j["dropped"] = r.dropped;
  Json coefs = Json::array();
  for (std::size_t i = 0; i < r.names.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    Json c;
    c["name"] = r.names[i];
    c["label"] = r.labels[i];
    c["estimate"] = number(r.coef(ii));
    c["se"] = number(r.se(ii));
    c["t"] = number(r.se(ii) > 0.0 ? r.coef(ii) / r.se(ii) : std::nan(""));
    c["p"] = number(r.p_value(i));
    c["stars"] = stars_for(r, i);
    coefs.push_back(c);
  }
  j["coefficients"] = coefs;
  Json v = Json::array();
  for (Eigen::Index a = 0; a < r.vcov.rows(); ++a) {
    Json row = Json::array();
    for (Eigen::Index b = 0; b < r.vcov.cols(); ++b) row.push_back(number(r.vcov(a, b)));
    v.push_back(row);
  }
  j["vcov"] = v;
  return j;
}

Json to_json(const ols::WaldResult& w) {
  Json j;
  j["statistic"] = number(w.statistic);
  j["df"] = w.df;
  j["p_value"] = number(w.p_value);
  j["residual_df"] = w.residual_df;
  j["restricted_residual_df"] = w.residual_df + static_cast<std::size_t>(w.df);
  return j;
}

Json to_json(const qdgmm::QDEstimate& e) {
  Json j = to_json(e.report);
  j["iterations"] = e.iterations;
  j["moment_norm"] = number(e.moment_norm);
  j["init"] = e.init;
  Json t = Json::array();
  for (const auto& rec : e.trajectory) {
    t.push_back({{"iteration", rec.iteration},
                 {"moment_norm", number(rec.moment_norm)},
                 {"step_norm", number(rec.step_norm)}});
  }
  j["trajectory"] = t;
  return j;
}

Json to_json(const shiftshare::FirstStage& fs) {
  Json j;
  j["endogenous"] = fs.endogenous;
  j["partial_f"] = std::isfinite(fs.partial_f) ? Json(fs.partial_f) : Json("inf");
  j["df"] = fs.df;
  j["p_value"] = number(fs.p_value);
  j["perfect_fit"] = fs.perfect_fit;
  j["report"] = to_json(fs.report);
  return j;
}

Json to_json(const shiftshare::HansenJ& h) {
  Json j;
  j["statistic"] = number(h.statistic);
  j["df"] = h.df;
  j["p_value"] = number(h.p_value);
  j["testable"] = h.testable;
  return j;
}

Json to_json(const shiftshare::IvResult& r) {
  Json j;
  j["label"] = r.label;
  j["instruments"] = r.instruments_used;
  j["second_stage"] = to_json(r.report);
  Json fs = Json::array();
  for (const auto& f : r.first_stages) fs.push_back(to_json(f));
  j["first_stages"] = fs;
  j["hansen_j"] = to_json(r.hansen);
  return j;
}

Json to_json(const market::AsymmetryReport& a) {
  auto branch = [](const market::Branch& b) {
    return Json{{"price", number(b.price)},
                {"homeless", b.homeless},
                {"d_price", number(b.d_price)},
                {"d_homeless", number(b.d_homeless)}};
  };
  Json j;
  j["shift"] = a.shift;
  j["baseline_price"] = number(a.baseline_price);
  j["baseline_homeless"] = a.baseline_homeless;
  j["inward"] = branch(a.inward);
  j["outward"] = branch(a.outward);
  j["ratio"] = a.ratio ? number(*a.ratio) : Json(nullptr);
  j["flags"] = a.flags;
  return j;
}

Json to_json(const panel::CorrelationResult& c) {
  return Json{{"r", number(c.r)}, {"t", number(c.t)}, {"p", number(c.p)},
              {"n", c.n},         {"dropped", c.dropped}, {"stars", c.stars}};
}

Json envelope(const std::string& kind, Json payload) {
  Json j;
  j["schema_version"] = kSchemaVersion;
  j["kind"] = kind;
  for (auto& [k, v] : payload.items()) j[k] = v;
  return j;
}

std::string legend(StarLegend l) {
  return l == StarLegend::kRegression ? "+ p < 0.1, * p < 0.05, ** p < 0.01, *** p < 0.001"
                                      : "* p < 0.05, ** p < 0.01, *** p < 0.001";
}

std::string regression_table(const std::vector<const ols::EstimateReport*>& columns,
                             const std::string& title, const TableStyle& style) {
  // Row order: first appearance across columns.
  std::vector<std::pair<std::string, std::string>> rows;
  bool any_period = false;
  for (const auto* c : columns) {
    for (std::size_t j = 0; j < c->names.size(); ++j) {
      const auto& name = c->names[j];
      if (is_period(name)) any_period = true;
      if (style.hide_intercept && name == "(Intercept)") continue;
      if (style.hide_periods && is_period(name)) continue;
      if (std::none_of(rows.begin(), rows.end(), [&](const auto& r) { return r.first == name; })) {
        rows.emplace_back(name, c->labels[j]);
      }
    }
  }
  if (style.periods_first) {
    std::stable_partition(rows.begin(), rows.end(), [](const auto& r) { return is_period(r.first); });
  }
  Grid g;
  std::vector<std::string> head{""};
  std::vector<std::string> outcome{""};
  for (std::size_t c = 0; c < columns.size(); ++c) {
    head.push_back("(" + std::to_string(c + 1) + ")");
    outcome.push_back(columns[c]->outcome);
  }
  g.push_back(head);
  g.push_back(outcome);
  g.push_back({});
  for (const auto& [name, label] : rows) {
    std::vector<std::string> est{label};
    std::vector<std::string> se{""};
    for (const auto* c : columns) {
      auto j = c->index_of(name);
      if (!j) {
        est.emplace_back("");
        se.emplace_back("");
        continue;
      }
      const auto jj = static_cast<Eigen::Index>(*j);
      est.push_back(format_fixed(c->coef(jj), style.decimals) + stars_for(*c, *j));
      se.push_back("(" + format_fixed(c->se(jj), style.decimals) + ")");
    }
    g.push_back(est);
    g.push_back(se);
  }
  g.push_back({});
  std::vector<std::string> obs{"Num.Obs."}, r2{"R2"}, adj{"R2 Adj."}, rmse{"RMSE"},
      se_row{"Std.Errors"}, fe{"FE: year"};
  for (const auto* c : columns) {
    obs.push_back(std::to_string(c->n));
    r2.push_back(fixed_or_na(c->r2, 3));
    adj.push_back(fixed_or_na(c->adj_r2, 3));
    rmse.push_back(fixed_or_na(c->rmse, 2));
    se_row.push_back("by: " + c->cluster_by);
    const bool has = std::any_of(c->names.begin(), c->names.end(), is_period);
    fe.emplace_back(has ? "X" : "");
  }
  g.push_back(obs);
  g.push_back(r2);
  g.push_back(adj);
  g.push_back(rmse);
  g.push_back(se_row);
  if (style.hide_periods && any_period) g.push_back(fe);

  std::string footer = legend(StarLegend::kRegression);
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c]->dropped > 0) {
      footer += "\nNote: " + std::to_string(columns[c]->dropped) + " observation(s) in column (" +
                std::to_string(c + 1) + ") dropped; see the drop log.";
    }
  }
  return render(g, title, footer);
}

std::string qd_table(const std::vector<const qdgmm::QDEstimate*>& columns, const std::string& title) {
  std::vector<ols::EstimateReport> reports;
  for (const auto* c : columns) {
    reports.push_back(c->report);
    for (std::size_t j = 0; j < reports.back().names.size(); ++j) {
      const auto& n = reports.back().names[j];
      if (is_period(n)) reports.back().labels[j] = "Years " + n.substr(7) + " Trend";
    }
  }
  std::vector<const ols::EstimateReport*> ptrs;
  for (const auto& r : reports) ptrs.push_back(&r);
  TableStyle style;
  style.decimals = 4;
  style.hide_intercept = true;
  style.hide_periods = false;
  style.periods_first = true;
  std::string out = regression_table(ptrs, title, style);
  std::ostringstream extra;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    extra << "Column (" << c + 1 << "): outcome scale " << format_double(columns[c]->outcome_scale)
          << ", iterations " << columns[c]->iterations << ", ||m|| "
          << format_double(columns[c]->moment_norm) << "\n";
  }
  return out + extra.str();
}

std::string wald_table(const std::vector<std::pair<std::string, ols::WaldResult>>& rows) {
  Grid g;
  g.push_back({"", "Res.Df", "Df", "Chisq", "Pr(>Chisq)"});
  g.push_back({});
  for (const auto& [label, w] : rows) {
    g.push_back({label, std::to_string(w.residual_df + static_cast<std::size_t>(w.df)), "", "", ""});
    g.push_back({"", std::to_string(w.residual_df), std::to_string(w.df),
                 format_fixed(w.statistic, 2), format_fixed(w.p_value, 4)});
    g.push_back({});
  }
  g.pop_back();
  return render(g, "Chi-Squared Test Results", "");
}

std::string correlation_table(const std::vector<CorrelationRow>& rows, const std::string& title) {
  Grid g;
  g.push_back({"", "Year", "Raw Correlation", "Correlation of Logged Values"});
  g.push_back({});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    g.push_back({std::to_string(i + 1), std::to_string(r.year),
                 format_fixed(r.raw.r, 3) + r.raw.stars, format_fixed(r.logged.r, 3) + r.logged.stars});
  }
  return render(g, title, legend(StarLegend::kCorrelation));
}

std::string summary_table(const std::vector<panel::SummaryRow>& rows,
                          const std::vector<std::string>& variables, const std::string& title) {
  Grid g;
  std::vector<std::string> head{"", "year", "count"};
  for (const auto& v : variables) head.push_back("Mean " + v);
  for (const auto& v : variables) head.push_back("Mean Log " + v);
  g.push_back(head);
  g.push_back({});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    std::vector<std::string> line{std::to_string(i + 1), std::to_string(r.year),
                                  std::to_string(r.count)};
    for (double m : r.means) line.push_back(fixed_or_na(m, 12));
    for (double m : r.log_means) line.push_back(fixed_or_na(m, 12));
    g.push_back(line);
  }
  return render(g, title, "");
}

std::string first_stage_table(const shiftshare::IvResult& result) {
  Grid g;
  g.push_back({"Endogenous", "Partial F", "Df", "p", "Num.Obs."});
  g.push_back({});
  for (const auto& fs : result.first_stages) {
    g.push_back({fs.endogenous, fs.perfect_fit ? "inf (perfect fit)" : format_fixed(fs.partial_f, 2),
                 std::to_string(fs.df), format_fixed(fs.p_value, 4), std::to_string(fs.report.n)});
  }
  std::string footer = "Partial F on the excluded instruments; values below 10 indicate weak instruments.";
  if (result.hansen.testable) {
    footer += "\nHansen J = " + format_fixed(result.hansen.statistic, 3) + " on " +
              std::to_string(result.hansen.df) + " df, p = " + format_fixed(result.hansen.p_value, 4);
  } else {
    footer += "\nHansen J: not testable (exactly identified)";
  }
  return render(g, "First stages: " + result.label, footer);
}

std::string semi_elasticity_note(double coefficient, double delta, const std::string& label) {
  const double points = coefficient * delta;
  const double pct = std::expm1(points) * 100.0;
  return "a " + format_double(delta) + " change in " + label + " moves the expected outcome by " +
         format_fixed(points, 2) + " log points (" + (pct >= 0 ? "+" : "") + format_fixed(pct, 1) +
         "%)";
}

void write_margins_csv(const std::vector<ols::MarginsPoint>& curve, std::ostream& out) {
  csv::write_row(out, {"grid", "fit", "lo", "hi"});
  for (const auto& p : curve) {
    csv::write_row(out, {format_double(p.grid), format_double(p.fit), format_double(p.lo),
                         format_double(p.hi)});
  }
}

void write_market_csv(const std::vector<market::PeriodRecord>& periods, std::ostream& out) {
  csv::write_row(out, {"t", "price", "quantity", "homeless_count", "mean_income_homeless",
                       "mean_income_housed"});
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string("NA"); };
  for (const auto& p : periods) {
    csv::write_row(out, {std::to_string(p.t), format_double(p.price), std::to_string(p.quantity),
                         std::to_string(p.homeless_count), opt(p.mean_income_homeless),
                         opt(p.mean_income_housed)});
  }
}

}  // namespace atlas::report
