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
#include "atlas/pipeline.hpp"

#include <chrono>
#include <climits>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "atlas/csv.hpp"
#include "atlas/error.hpp"
#include "atlas/geojson.hpp"
#include "atlas/interpolate.hpp"
#include "atlas/numeric.hpp"
#include "atlas/ols.hpp"
#include "atlas/qdgmm.hpp"
#include "atlas/report.hpp"
#include "atlas/shiftshare.hpp"

namespace atlas::pipeline {
namespace fs = std::filesystem;
using nlohmann::json;
using report::Json;

namespace {

constexpr int kAllYears = INT_MIN;

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int parse_year_key(const std::string& key, const std::string& where) {
  try {
    std::size_t pos = 0;
    const int y = std::stoi(key, &pos);
    if (pos != key.size()) throw std::invalid_argument(key);
    return y;
  } catch (const std::exception&) {
    throw ConfigError(where + ": '" + key + "' is not a year");
  }
}

std::vector<std::pair<int, int>> parse_periods(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected a list of [t0, t1] pairs");
  std::vector<std::pair<int, int>> out;
  for (const auto& p : j) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number_integer() || !p[1].is_number_integer()) {
      throw ConfigError(where + ": expected [t0, t1] integer pairs");
    }
    const int t0 = p[0].get<int>();
    const int t1 = p[1].get<int>();
    if (t1 <= t0) throw ConfigError(where + ": period end must follow its start");
    out.emplace_back(t0, t1);
  }
  return out;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, _] : j.items()) {
    if (!allowed.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

panel::VariableSpec parse_variable(const json& j, const std::string& where) {
  panel::VariableSpec v;
  if (j.is_string()) {
    v.variable = j.get<std::string>();
    return v;
  }
  check_keys(j, {"variable", "transform", "deflate", "label"}, where);
  if (!j.contains("variable")) throw ConfigError(where + ": missing 'variable'");
  v.variable = j.at("variable").get<std::string>();
  const auto t = j.value("transform", std::string("level"));
  if (t == "log") {
    v.transform = panel::Transform::kLog;
  } else if (t != "level") {
    throw ConfigError(where + ": transform must be 'level' or 'log'");
  }
  v.deflate = j.value("deflate", false);
  v.label = j.value("label", std::string());
  return v;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// Writes outputs and records their digests in the manifest.
class OutputWriter {
 public:
  OutputWriter(fs::path dir, RunManifest& manifest) : dir_(std::move(dir)), manifest_(manifest) {
    fs::create_directories(dir_);
  }

  void write(const std::string& name, const std::string& content) {
    const auto path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw ConfigError("write failed for '" + path.string() + "'");
    manifest_.outputs.push_back({name, sha256_hex(content), content.size()});
  }

  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  RunManifest& manifest_;
};

void record_input(RunManifest& m, const PipelineConfig& c, const fs::path& resolved) {
  const std::string shown = resolved.lexically_relative(c.base_dir).generic_string();
  for (const auto& d : m.inputs) {
    if (d.path == shown) return;
  }
  const auto text = read_text(resolved);
  m.inputs.push_back({shown, sha256_hex(text), text.size()});
}

fs::path out_dir(const PipelineConfig& c, const RunOptions& o) {
  return o.out_dir ? *o.out_dir : c.resolve(c.output_dir);
}

RunManifest start_manifest(const std::string& command, const PipelineConfig& c, const RunOptions& o) {
  RunManifest m;
  m.command = command;
  m.preset = o.preset.value_or("");
  m.config_sha256 = sha256_hex(c.config_text);
  m.seed = o.seed.value_or(c.seed);
  return m;
}

std::string manifest_json(const RunManifest& m) {
  Json j;
  j["schema_version"] = report::kSchemaVersion;
  j["kind"] = "manifest";
  j["command"] = m.command;
  j["preset"] = m.preset;
  j["config_sha256"] = m.config_sha256;
  j["seed"] = m.seed;
  j["module_versions"] = {{"atlas", kVersion},
                          {"geo", kVersion},
                          {"interpolate", kVersion},
                          {"panel", kVersion},
                          {"ols", kVersion},
                          {"qdgmm", kVersion},
                          {"shiftshare", kVersion},
                          {"market", kVersion}};
  auto digests = [](const std::vector<FileDigest>& v) {
    Json a = Json::array();
    for (const auto& d : v) a.push_back({{"path", d.path}, {"sha256", d.sha256}, {"bytes", d.bytes}});
    return a;
  };
  j["inputs"] = digests(m.inputs);
  j["outputs"] = digests(m.outputs);
  Json stages = Json::array();
  for (const auto& s : m.stages) {
    stages.push_back({{"name", s.name}, {"rows", s.rows}, {"drops", s.drops}, {"wall_ms", s.wall_ms}});
  }
  j["stages"] = stages;
  j["drop_logs"] = m.drop_logs;
  return report::dump(j);
}

panel::RawSeries load_series(const PipelineConfig& c, RunManifest& m) {
  if (!c.series) throw ConfigError("config: panel.series is required for this command");
  const auto path = c.resolve(*c.series);
  record_input(m, c, path);
  auto s = panel::read_series_csv(path);
  panel::validate(s);
  return s;
}

std::optional<panel::DeflatorTable> load_deflator(const PipelineConfig& c, RunManifest& m) {
  if (!c.deflator) return std::nullopt;
  const auto path = c.resolve(*c.deflator);
  record_input(m, c, path);
  return panel::read_deflator_csv(path);
}

bool needs_deflator(const panel::SpecConfig& s) {
  if (s.outcome.deflate || s.split.deflate) return true;
  for (const auto& c : s.covariates) {
    if (c.deflate) return true;
  }
  for (const auto& a : s.auxiliary) {
    if (a.deflate) return true;
  }
  return false;
}

std::string drop_log_text(const panel::DropLog& drops) {
  std::ostringstream out;
  panel::write_drop_log_csv(drops, out);
  return out.str();
}

// --- presets ---------------------------------------------------------------

panel::VariableSpec var(std::string name, panel::Transform t, bool deflate, std::string label) {
  return {std::move(name), t, deflate, std::move(label)};
}

constexpr auto kLog = panel::Transform::kLog;
constexpr auto kLevel = panel::Transform::kLevel;

panel::VariableSpec chronic_log() { return var("chronic_rate", kLog, false, "Δ log Chronic Rate"); }
panel::VariableSpec crowded_log() { return var("crowded_rate", kLog, false, "Δ log Crowded Rate"); }
panel::VariableSpec rent_log() { return var("median_rent", kLog, true, "Δ log Rent"); }
panel::VariableSpec pa() { return var("pct_public_assistance", kLevel, false, "Δ %pop with P.A."); }
panel::VariableSpec income_level() {
  return var("median_hh_income", kLevel, true, "Δ Median HH Inc.");
}
panel::VariableSpec income_log() {
  return var("median_hh_income", kLog, true, "Δ log Median HH Inc.");
}

panel::SpecConfig make_spec(std::string name, std::string title, panel::VariableSpec outcome,
                            panel::VariableSpec split, std::vector<panel::VariableSpec> covariates,
                            std::vector<std::pair<int, int>> periods, const PipelineConfig& c) {
  panel::SpecConfig s;
  s.name = std::move(name);
  s.title = std::move(title);
  s.outcome = std::move(outcome);
  s.split = std::move(split);
  s.covariates = std::move(covariates);
  s.periods = std::move(periods);
  s.derived = c.derived;
  return s;
}

std::map<std::string, PresetGroup> builtin_presets(const PipelineConfig& c) {
  std::map<std::string, PresetGroup> g;
  auto single = [&](const panel::SpecConfig& s) { g[s.name] = {s.name, s.title, {s}}; };
  auto group = [&](const std::string& name, const std::string& title,
                   std::vector<panel::SpecConfig> specs) {
    for (const auto& s : specs) single(s);
    g[name] = {name, title, std::move(specs)};
  };
  const auto& main = c.periods;
  const auto& lng = c.long_periods;

  group("table3", "OLS Regression Results on Housing Crowding",
        {make_spec("table3-col1", "Chronic rate, pooled periods", chronic_log(), rent_log(),
                   {pa(), income_level()}, main, c),
         make_spec("table3-col2", "Crowded rate, pooled periods", crowded_log(), rent_log(),
                   {pa(), income_level()}, main, c),
         make_spec("table3-col3", "Chronic rate, long difference", chronic_log(), rent_log(),
                   {pa(), income_log()}, lng, c),
         make_spec("table3-col4", "Crowded rate, long difference", crowded_log(), rent_log(),
                   {pa(), income_log()}, lng, c)});

  std::vector<panel::SpecConfig> q;
  const char* ordinals[] = {"1st", "2nd", "3rd", "4th", "5th"};
  for (int k = 1; k <= 5; ++k) {
    q.push_back(make_spec("table6-q" + std::to_string(k), "Income quintile " + std::to_string(k),
                          chronic_log(), rent_log(),
                          {pa(), var("income_q" + std::to_string(k), kLog, true,
                                     std::string("Δ log ") + ordinals[k - 1] + " Quintile Inc.")},
                          main, c));
  }
  group("table6", "Chronic Homelessness Rate: income quintiles", std::move(q));

  std::vector<panel::SpecConfig> p;
  for (const auto& [code, text] : std::vector<std::pair<std::string, std::string>>{
           {"05", "5th"}, {"15", "15th"}, {"25", "25th"}, {"50", "50th"}}) {
    p.push_back(make_spec("table7-p" + code, "Rent " + text + " percentile", chronic_log(),
                          var("rent_p" + code, kLog, true, "Δ Rent " + text + " pct (IPUMS)"),
                          {pa(), income_log()}, lng, c));
  }
  group("table7", "Chronic Homelessness Rate: rent percentiles", std::move(p));

  auto t8a = make_spec("table8-col1", "Vacancy on rent",
                       var("vacancy_rate", kLog, false, "Δ Log Vacancy Rate"),
                       var("median_rent", kLevel, true, "Δ Median Rent"), {}, main, c);
  t8a.piecewise = false;
  auto t8b = make_spec("table8-col2", "Rent on vacancy",
                       var("median_rent", kLevel, true, "Δ Median Rent"),
                       var("vacancy_rate", kLog, false, "Δ log Vacancy Rate"), {}, main, c);
  t8b.piecewise = false;
  group("table8", "Positive Relationships between Median Rent and Vacancy Rates", {t8a, t8b});

  const auto unemp = var("unemployment_rate", kLog, false, "Δ log Unemp");
  group("note2-unemp", "Unemployment: OLS",
        {make_spec("note2-unemp-col1", "Chronic rate on unemployment", chronic_log(), unemp,
                   {pa(), income_level()}, main, c),
         make_spec("note2-unemp-col2", "Chronic rate on unemployment, no income", chronic_log(),
                   unemp, {pa()}, main, c),
         make_spec("note2-unemp-col3", "Crowded rate on unemployment", crowded_log(), unemp,
                   {pa(), income_level()}, main, c)});

  auto qd = [&](std::string name, std::string title, panel::VariableSpec outcome,
                panel::VariableSpec split) {
    auto s = make_spec(std::move(name), std::move(title), std::move(outcome), std::move(split),
                       {var("pct_public_assistance", kLevel, false,
                            "Δ %pop with Cash Public Assistance"),
                        var("median_hh_income", kLevel, true, "Δ Median Household Income")},
                       main, c);
    s.estimator = "qd";
    s.outcome_scale = c.outcome_scale;
    return s;
  };
  const auto chronic_level = var("chronic_rate", kLevel, false, "Δ Chronic Rate");
  const auto crowded_level = var("crowded_rate", kLevel, false, "Δ Crowded Rate");
  group("table5", "Method of Moments Estimates",
        {qd("table5-col1", "Chronic rate", chronic_level, var("median_rent", kLevel, true, "Δ Rent")),
         qd("table5-col2", "Crowded rate", crowded_level, var("median_rent", kLevel, true, "Δ Rent"))});
  const auto unemp_level = var("unemployment_rate", kLevel, false, "Δ Unemp");
  group("note2-mm", "Unemployment: Method of Moments Estimates",
        {qd("note2-mm-col1", "Chronic rate", chronic_level, unemp_level),
         qd("note2-mm-col2", "Crowded rate", crowded_level, unemp_level)});

  auto iv = [&](std::string name, std::string title, std::string estimator) {
    auto s = make_spec(std::move(name), std::move(title), chronic_log(), rent_log(),
                       {pa(), income_level()}, main, c);
    s.auxiliary = {var("employment", kLog, false, "Δ log E")};
    s.estimator = std::move(estimator);
    return s;
  };
  single(iv("iv-main", "Shift-share IV, employment instrumented", "iv"));
  single(iv("iv-predicted", "Shift-share IV, predicted employment as control", "iv-predicted"));
  return g;
}

// --- estimation ---------------------------------------------------------------

struct ColumnResult {
  panel::SpecConfig spec;
  panel::Panel panel;
  std::optional<ols::EstimateReport> ols;
  std::optional<ols::WaldResult> wald;
  std::vector<ols::MarginsPoint> margins;
  std::optional<qdgmm::QDEstimate> qd;
  std::vector<shiftshare::IvResult> iv;
  panel::DropLog iv_drops;
};

std::vector<double> default_grid() {
  std::vector<double> g;
  for (int i = -30; i <= 30; ++i) g.push_back(static_cast<double>(i) / 100.0);
  return g;
}

struct IvInputs {
  shiftshare::IndustryShares shares;
  shiftshare::NationalGrowth growth;
  shiftshare::SupplyConstraints eta;
};

ColumnResult estimate_column(const panel::SpecConfig& spec, const panel::RawSeries& series,
                             const panel::DeflatorTable* deflators, const IvInputs* iv,
                             const std::vector<double>& grid) {
  ColumnResult r;
  r.spec = spec;
  r.panel = panel::build_panel(series, spec, deflators);
  if (spec.estimator == "ols") {
    r.ols = ols::fit(ols::design_from_panel(r.panel), spec.name);
    r.ols->outcome = panel::display_label(spec.outcome);
    r.ols->dropped = r.panel.drops.size();
    if (spec.piecewise) {
      const auto names = ols::split_names(spec);
      r.wald = ols::test_equal(*r.ols, names.plus, names.minus);
      r.margins = ols::margins(*r.ols, grid, {}, names.plus, names.minus);
    }
  } else if (spec.estimator == "qd") {
    auto data = qdgmm::qd_data_from_panel(r.panel);
    r.qd = qdgmm::fit_qd(data, {}, spec.name);
    r.qd->report.outcome = panel::display_label(spec.outcome);
    r.qd->report.dropped = r.panel.drops.size();
  } else if (spec.estimator == "iv" || spec.estimator == "iv-predicted") {
    const auto mode = spec.estimator == "iv" ? shiftshare::EmploymentMode::kEndogenous
                                             : shiftshare::EmploymentMode::kPredictedExogenous;
    const auto inst = shiftshare::build_instruments(iv->shares, iv->growth, iv->eta, spec.periods);
    const auto system = shiftshare::iv_system_from_panel(r.panel, inst, mode);
    r.iv_drops = system.drops;
    r.iv = shiftshare::fit_with_leave_one_out(system, spec.name);
    for (auto& fit : r.iv) {
      fit.report.outcome = panel::display_label(spec.outcome);
      fit.report.dropped = r.panel.drops.size();
    }
  } else {
    throw ConfigError("unknown estimator '" + spec.estimator + "'");
  }
  return r;
}

}  // namespace

// --- config ------------------------------------------------------------------

fs::path PipelineConfig::resolve(const fs::path& p) const {
  return p.is_absolute() ? p : (base_dir / p).lexically_normal();
}

panel::SpecConfig parse_spec(const json& j) {
  check_keys(j, {"name", "title", "estimator", "outcome", "split", "piecewise", "covariates",
                 "auxiliary", "periods", "outcome_scale", "chronic_denominator"},
             "spec");
  panel::SpecConfig s;
  if (!j.contains("name") || !j.contains("outcome") || !j.contains("split") ||
      !j.contains("periods")) {
    throw ConfigError("spec: 'name', 'outcome', 'split' and 'periods' are required");
  }
  s.name = j.at("name").get<std::string>();
  const std::string where = "spec '" + s.name + "'";
  s.title = j.value("title", s.name);
  s.estimator = j.value("estimator", std::string("ols"));
  if (s.estimator != "ols" && s.estimator != "qd" && s.estimator != "iv" &&
      s.estimator != "iv-predicted") {
    throw ConfigError(where + ": estimator must be ols, qd, iv or iv-predicted");
  }
  s.outcome = parse_variable(j.at("outcome"), where + " outcome");
  s.split = parse_variable(j.at("split"), where + " split");
  s.piecewise = j.value("piecewise", true);
  for (const auto& c : j.value("covariates", json::array())) {
    s.covariates.push_back(parse_variable(c, where + " covariate"));
  }
  for (const auto& a : j.value("auxiliary", json::array())) {
    s.auxiliary.push_back(parse_variable(a, where + " auxiliary"));
  }
  s.periods = parse_periods(j.at("periods"), where + " periods");
  s.outcome_scale = j.value("outcome_scale", 1.0);
  if (!(s.outcome_scale > 0.0)) throw ConfigError(where + ": outcome_scale must be positive");
  s.derived.chronic_denominator = j.value("chronic_denominator", std::string("population"));
  return s;
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir,
                            const fs::path& config_path) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + config_path.string() + "': " + e.what());
  }
  PipelineConfig c;
  c.config_path = config_path;
  c.config_text = text;
  c.base_dir = base_dir;
  try {
    check_keys(j, {"output_dir", "seed", "interpolation", "panel", "estimate", "iv", "validate",
                   "market"},
               "config");
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    c.seed = j.value("seed", std::uint64_t{1});

    if (j.contains("interpolation")) {
      const auto& ji = j.at("interpolation");
      check_keys(ji, {"source_geometries", "target_geometries", "points", "counts",
                      "source_id_key", "target_id_key", "exclusions"},
                 "interpolation");
      InterpolationInputs in;
      const auto& src = ji.at("source_geometries");
      if (src.is_string()) {
        in.source_geometries[kAllYears] = src.get<std::string>();
      } else {
        for (const auto& [k, v] : src.items()) {
          in.source_geometries[parse_year_key(k, "interpolation.source_geometries")] =
              v.get<std::string>();
        }
      }
      in.target_geometries = ji.at("target_geometries").get<std::string>();
      in.points = ji.at("points").get<std::string>();
      in.counts = ji.at("counts").get<std::string>();
      in.source_id_key = ji.value("source_id_key", std::string("GEOID"));
      in.target_id_key = ji.value("target_id_key", std::string("GEOID"));
      const json exclusions = ji.value("exclusions", json::object());
      for (const auto& [k, v] : exclusions.items()) {
        auto& set = in.exclusions[parse_year_key(k, "interpolation.exclusions")];
        for (const auto& id : v) set.insert(id.get<std::string>());
      }
      c.interpolation = std::move(in);
    }

    if (j.contains("panel")) {
      const auto& jp = j.at("panel");
      check_keys(jp, {"series", "deflator", "periods", "long_periods", "chronic_denominator"},
                 "panel");
      if (jp.contains("series")) c.series = jp.at("series").get<std::string>();
      if (jp.contains("deflator")) c.deflator = jp.at("deflator").get<std::string>();
      if (jp.contains("periods")) c.periods = parse_periods(jp.at("periods"), "panel.periods");
      if (jp.contains("long_periods")) {
        c.long_periods = parse_periods(jp.at("long_periods"), "panel.long_periods");
      }
      c.derived.chronic_denominator = jp.value("chronic_denominator", std::string("population"));
    }

    if (j.contains("estimate")) {
      const auto& je = j.at("estimate");
      check_keys(je, {"presets", "outcome_scale", "margins_grid", "specs"}, "estimate");
      c.presets = je.value("presets", std::vector<std::string>{});
      c.outcome_scale = je.value("outcome_scale", 1.0);
      if (!(c.outcome_scale > 0.0)) throw ConfigError("estimate.outcome_scale must be positive");
      if (je.contains("margins_grid")) {
        const auto& g = je.at("margins_grid");
        for (const auto& v : g) {
          const double x = v.get<double>();
          if (!std::isfinite(x)) throw ConfigError("estimate.margins_grid: non-finite value");
          c.margins_grid.push_back(x);
        }
      }
      for (const auto& s : je.value("specs", json::array())) {
        auto spec = parse_spec(s);
        c.custom_specs[spec.name] = std::move(spec);
      }
    }

    if (j.contains("iv")) {
      const auto& jv = j.at("iv");
      check_keys(jv, {"eta", "industry_shares", "national_growth"}, "iv");
      if (jv.contains("eta")) c.eta = jv.at("eta").get<std::string>();
      if (jv.contains("industry_shares")) c.industry_shares = jv.at("industry_shares").get<std::string>();
      if (jv.contains("national_growth")) c.national_growth = jv.at("national_growth").get<std::string>();
    }

    if (j.contains("validate")) {
      check_keys(j.at("validate"), {"years"}, "validate");
      c.validate_years = j.at("validate").value("years", c.validate_years);
    }

    if (j.contains("market")) {
      const auto& jm = j.at("market");
      check_keys(jm, {"a", "h_min", "h_next", "p_next", "agents", "income_log_mean",
                      "income_log_sd", "supply", "delta", "epsilon_half_width", "income_floor",
                      "periods", "shocks", "asymmetry_shift", "bridge"},
                 "market");
      auto& m = c.market;
      auto& mc = m.config;
      mc.utility.a = jm.value("a", mc.utility.a);
      mc.utility.h_min = jm.value("h_min", mc.utility.h_min);
      mc.utility.h_next = jm.value("h_next", mc.utility.h_next);
      mc.utility.p_next = jm.value("p_next", mc.utility.p_next);
      const std::size_t default_agents = mc.agents;
      mc.agents = jm.value("agents", mc.agents);
      mc.income_log_mean = jm.value("income_log_mean", mc.income_log_mean);
      mc.income_log_sd = jm.value("income_log_sd", mc.income_log_sd);
      if (jm.contains("supply")) {
        std::vector<std::pair<double, double>> pts;
        for (const auto& pt : jm.at("supply")) {
          if (!pt.is_array() || pt.size() != 2) throw ConfigError("market.supply: expected [price, quantity]");
          pts.emplace_back(pt[0].get<double>(), pt[1].get<double>());
        }
        mc.supply = market::SupplyCurve(std::move(pts));
      } else if (mc.agents != default_agents) {
        mc.supply = mc.supply.scaled(static_cast<double>(mc.agents) / static_cast<double>(default_agents));
      }
      mc.delta = jm.value("delta", mc.delta);
      mc.epsilon_half_width = jm.value("epsilon_half_width", mc.epsilon_half_width);
      mc.income_floor = jm.value("income_floor", mc.income_floor);
      m.periods = jm.value("periods", m.periods);
      const json shocks = jm.value("shocks", json::object());
      for (const auto& [k, v] : shocks.items()) {
        m.shocks[parse_year_key(k, "market.shocks")] = v.get<double>();
      }
      m.asymmetry_shift = jm.value("asymmetry_shift", m.asymmetry_shift);
      if (jm.contains("bridge")) {
        const auto& jb = jm.at("bridge");
        check_keys(jb, {"enabled", "seeds", "markets", "agents", "burn_in", "shock_half_width",
                        "income_log_mean_spread"},
                   "market.bridge");
        m.bridge = jb.value("enabled", true);
        m.bridge_seeds = jb.value("seeds", m.bridge_seeds);
        auto& b = m.bridge_config;
        b.markets = jb.value("markets", b.markets);
        b.agents = jb.value("agents", b.agents);
        b.burn_in = jb.value("burn_in", b.burn_in);
        b.shock_half_width = jb.value("shock_half_width", b.shock_half_width);
        b.income_log_mean_spread = jb.value("income_log_mean_spread", b.income_log_mean_spread);
      }
      market::validate(mc);
    }
  } catch (const json::exception& e) {
    throw ConfigError("config '" + config_path.string() + "': " + e.what());
  }
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  const auto text = read_text(path);
  return parse_config(text, path.parent_path().empty() ? fs::path(".") : path.parent_path(), path);
}

std::vector<std::string> builtin_preset_names() {
  PipelineConfig c;
  std::vector<std::string> out;
  for (const auto& [name, _] : builtin_presets(c)) out.push_back(name);
  return out;
}

PresetGroup resolve_preset(const std::string& name, const PipelineConfig& config) {
  if (auto it = config.custom_specs.find(name); it != config.custom_specs.end()) {
    return {name, it->second.title, {it->second}};
  }
  auto all = builtin_presets(config);
  auto it = all.find(name);
  if (it == all.end()) {
    std::string known;
    for (const auto& [k, _] : all) known += (known.empty() ? "" : ", ") + k;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return it->second;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_text(path)); }

// --- commands ------------------------------------------------------------------

RunManifest cmd_interpolate(const PipelineConfig& c, const RunOptions& o) {
  if (!c.interpolation) throw ConfigError("config: 'interpolation' section is required");
  const auto& in = *c.interpolation;
  auto m = start_manifest("interpolate", c, o);
  OutputWriter w(out_dir(c, o), m);

  auto t = Clock::now();
  const auto target_path = c.resolve(in.target_geometries);
  const auto points_path = c.resolve(in.points);
  const auto counts_path = c.resolve(in.counts);
  for (const auto& p : {target_path, points_path, counts_path}) {
    if (!fs::exists(p)) throw ConfigError("input file not found: '" + p.string() + "'");
  }
  record_input(m, c, target_path);
  record_input(m, c, points_path);
  record_input(m, c, counts_path);
  const auto target = geo::read_geojson(target_path, 0, in.target_id_key);
  const auto points = geo::read_points_csv(points_path);

  const auto table = csv::read_file(counts_path);
  table.require_columns({"region_id", "year", "count"});
  std::map<int, interpolate::RegionTotals> totals;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const int year = static_cast<int>(table.integer(r, table.column("year")));
    const double count = table.number(r, table.column("count"));
    if (!std::isfinite(count) || count < 0.0) {
      throw DataError(table.source() + ": invalid count at row " + std::to_string(r + 2));
    }
    if (!totals[year].emplace(table.cell(r, table.column("region_id")), count).second) {
      throw StructuralError(table.source() + ": duplicate region-year at row " + std::to_string(r + 2));
    }
  }
  m.stages.push_back({"load", points.size(), 0, ms_since(t)});

  // Years sharing a source vintage are interpolated together.
  std::map<fs::path, std::map<int, interpolate::RegionTotals>> by_vintage;
  for (const auto& [year, tot] : totals) {
    auto it = in.source_geometries.find(year);
    if (it == in.source_geometries.end()) it = in.source_geometries.find(kAllYears);
    if (it == in.source_geometries.end()) {
      throw ConfigError("no source geometries configured for year " + std::to_string(year));
    }
    by_vintage[c.resolve(it->second)][year] = tot;
  }

  t = Clock::now();
  std::vector<interpolate::YearResult> years;
  Json vintages = Json::array();
  for (const auto& [path, tot] : by_vintage) {
    if (!fs::exists(path)) throw ConfigError("input file not found: '" + path.string() + "'");
    record_input(m, c, path);
    const auto source = geo::read_geojson(path, tot.begin()->first, in.source_id_key);
    const auto result = interpolate::interpolate_counts(source, target, points, tot, in.exclusions);
    years.insert(years.end(), result.years.begin(), result.years.end());
    const auto& d = result.diagnostics;
    Json v;
    v["source_geometries"] = path.lexically_relative(c.base_dir).generic_string();
    Json ys = Json::array();
    for (const auto& [y, _] : tot) ys.push_back(y);
    v["years"] = ys;
    v["source_point_counts"] = d.source_point_counts;
    v["target_point_counts"] = d.target_point_counts;
    v["zero_population_regions"] = d.zero_population_regions;
    auto overlaps = [](const std::vector<geo::OverlapWarning>& ws) {
      Json a = Json::array();
      for (const auto& ow : ws) {
        a.push_back({{"point_id", ow.point_id}, {"regions", ow.region_ids}, {"chosen", ow.chosen}});
      }
      return a;
    };
    v["source_overlaps"] = overlaps(d.source_overlaps);
    v["target_overlaps"] = overlaps(d.target_overlaps);
    v["points_outside_source"] = d.points_outside_source;
    v["points_outside_target"] = d.points_outside_target;
    vintages.push_back(v);
  }
  std::sort(years.begin(), years.end(), [](const auto& a, const auto& b) { return a.year < b.year; });

  std::ostringstream out;
  csv::write_row(out, {"target_id", "year", "count"});
  std::size_t rows = 0;
  Json year_diag = Json::array();
  for (const auto& y : years) {
    KahanSum target_mass;
    for (const auto& [id, v] : y.target.totals) {
      csv::write_row(out, {id, std::to_string(y.year), format_double(v)});
      target_mass += v;
      ++rows;
    }
    year_diag.push_back({{"year", y.year},
                         {"source_mass", report::number(y.source_mass)},
                         {"target_mass", report::number(target_mass.value())},
                         {"excluded_mass", report::number(y.target.excluded_mass)},
                         {"excluded_share", report::number(y.excluded_share)},
                         {"excluded_regions", y.excluded_regions}});
  }
  m.stages.push_back({"interpolate", rows, 0, ms_since(t)});
  w.write("interpolated_counts.csv", out.str());
  w.write("interpolation_diagnostics.json",
          report::dump(report::envelope("interpolation_diagnostics",
                                        Json{{"years", year_diag}, {"vintages", vintages}})));
  return m;
}

namespace {

std::vector<std::string> requested_presets(const PipelineConfig& c, const RunOptions& o) {
  if (o.preset) return {*o.preset};
  if (c.presets.empty()) throw ConfigError("no preset given (use --preset or estimate.presets)");
  return c.presets;
}

}  // namespace

RunManifest cmd_panel(const PipelineConfig& c, const RunOptions& o) {
  auto m = start_manifest("panel", c, o);
  OutputWriter w(out_dir(c, o), m);
  auto t = Clock::now();
  const auto series = load_series(c, m);
  const auto deflators = load_deflator(c, m);
  m.stages.push_back({"load", series.values.size(), 0, ms_since(t)});
  for (const auto& name : requested_presets(c, o)) {
    const auto group = resolve_preset(name, c);
    for (const auto& spec : group.specs) {
      t = Clock::now();
      if (needs_deflator(spec) && !deflators) {
        throw ConfigError("preset '" + spec.name + "': deflator table required (panel.deflator)");
      }
      panel::Panel p;
      try {
        p = panel::build_panel(series, spec, deflators ? &*deflators : nullptr);
      } catch (const Error& e) {
        throw ConfigError("preset '" + spec.name + "': " + e.what());
      }
      std::ostringstream out;
      panel::write_panel_csv(p, out);
      w.write("panel_" + spec.name + ".csv", out.str());
      w.write("drops_" + spec.name + ".csv", drop_log_text(p.drops));
      m.drop_logs["panel:" + spec.name] = "drops_" + spec.name + ".csv";
      m.stages.push_back({"panel:" + spec.name, p.rows.size(), p.drops.size(), ms_since(t)});
    }
  }
  return m;
}

RunManifest cmd_estimate(const PipelineConfig& c, const RunOptions& o) {
  auto m = start_manifest("estimate", c, o);
  OutputWriter w(out_dir(c, o), m);
  auto t = Clock::now();
  const auto series = load_series(c, m);
  const auto deflators = load_deflator(c, m);
  m.stages.push_back({"load", series.values.size(), 0, ms_since(t)});
  const auto grid = c.margins_grid.empty() ? default_grid() : c.margins_grid;

  for (const auto& name : requested_presets(c, o)) {
    const auto group = resolve_preset(name, c);
    std::optional<IvInputs> iv;
    for (const auto& spec : group.specs) {
      if (needs_deflator(spec) && !deflators) {
        throw ConfigError("preset '" + spec.name + "': deflator table required (panel.deflator)");
      }
      if (spec.estimator.rfind("iv", 0) == 0 && !iv) {
        if (!c.eta || !c.industry_shares || !c.national_growth) {
          throw ConfigError("preset '" + spec.name +
                            "': iv.eta, iv.industry_shares and iv.national_growth are required");
        }
        IvInputs in;
        record_input(m, c, c.resolve(*c.eta));
        record_input(m, c, c.resolve(*c.industry_shares));
        record_input(m, c, c.resolve(*c.national_growth));
        in.eta = shiftshare::read_eta_csv(c.resolve(*c.eta));
        in.shares = shiftshare::read_shares_csv(c.resolve(*c.industry_shares));
        in.growth = shiftshare::read_growth_csv(c.resolve(*c.national_growth));
        iv = std::move(in);
      }
    }

    t = Clock::now();
    std::vector<ColumnResult> cols(group.specs.size());
    std::vector<std::exception_ptr> errors(group.specs.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(group.specs.size()); ++i) {
      const auto u = static_cast<std::size_t>(i);
      try {
        cols[u] = estimate_column(group.specs[u], series, deflators ? &*deflators : nullptr,
                                  iv ? &*iv : nullptr, grid);
      } catch (...) {
        errors[u] = std::current_exception();
      }
    }
    for (std::size_t u = 0; u < errors.size(); ++u) {
      if (!errors[u]) continue;
      try {
        std::rethrow_exception(errors[u]);
      } catch (const std::exception& e) {
        throw Error("preset '" + group.specs[u].name + "': " + e.what());
      }
    }

    Json columns = Json::array();
    std::string text;
    std::vector<const ols::EstimateReport*> ols_cols;
    std::vector<std::pair<std::string, ols::WaldResult>> walds;
    std::vector<const qdgmm::QDEstimate*> qd_cols;
    std::size_t rows = 0;
    std::size_t drops = 0;
    for (std::size_t u = 0; u < cols.size(); ++u) {
      const auto& col = cols[u];
      rows += col.panel.rows.size();
      drops += col.panel.drops.size();
      Json cj;
      cj["spec"] = col.spec.name;
      cj["title"] = col.spec.title;
      cj["estimator"] = col.spec.estimator;
      cj["n"] = col.panel.rows.size();
      cj["candidates"] = col.panel.candidates;
      cj["drops"] = report::drop_summary(col.panel.drops);
      cj["outcome_scale"] = col.spec.outcome_scale;
      const std::string drop_file = col.spec.name + "_drops.csv";
      w.write(drop_file, drop_log_text(col.panel.drops));
      m.drop_logs["estimate:" + col.spec.name] = drop_file;
      if (col.ols) {
        cj["report"] = report::to_json(*col.ols);
        ols_cols.push_back(&*col.ols);
        if (col.wald) {
          cj["wald_equal_split"] = report::to_json(*col.wald);
          walds.emplace_back("col (" + std::to_string(u + 1) + ")", *col.wald);
          const std::string mfile = col.spec.name + "_margins.csv";
          std::ostringstream mo;
          report::write_margins_csv(col.margins, mo);
          w.write(mfile, mo.str());
          cj["margins_file"] = mfile;
        }
      } else if (col.qd) {
        cj["report"] = report::to_json(*col.qd);
        qd_cols.push_back(&*col.qd);
      } else {
        Json fits = Json::array();
        for (const auto& f : col.iv) fits.push_back(report::to_json(f));
        cj["fits"] = fits;
        cj["leave_one_out_reports"] = col.iv.size() - 1;
        cj["instrument_drops"] = report::drop_summary(col.iv_drops);
        std::vector<const ols::EstimateReport*> ptrs;
        for (const auto& f : col.iv) ptrs.push_back(&f.report);
        text += report::regression_table(ptrs, col.spec.title + " (full system, then leave-one-out)");
        for (const auto& f : col.iv) text += "\n" + report::first_stage_table(f);
      }
      columns.push_back(cj);
    }
    if (!ols_cols.empty()) {
      text += report::regression_table(ols_cols, group.title);
      if (!walds.empty()) text += "\n" + report::wald_table(walds);
    }
    if (!qd_cols.empty()) {
      text += report::qd_table(qd_cols, group.title);
      for (const auto* q : qd_cols) {
        const auto& r = q->report;
        const auto names = ols::split_names(cols.front().spec);
        if (auto j = r.index_of(names.plus)) {
          text += "Interpretation (" + r.label + "): " +
                  report::semi_elasticity_note(r.coef(static_cast<Eigen::Index>(*j)), 100.0,
                                               r.labels[*j]) +
                  "\n";
        }
      }
    }
    m.stages.push_back({"estimate:" + group.name, rows, drops, ms_since(t)});
    w.write(group.name + ".json",
            report::dump(report::envelope("estimates", Json{{"preset", group.name},
                                                             {"title", group.title},
                                                             {"columns", columns}})));
    w.write(group.name + ".txt", text);
  }
  return m;
}

RunManifest cmd_simulate(const PipelineConfig& c, const RunOptions& o) {
  auto m = start_manifest("simulate", c, o);
  OutputWriter w(out_dir(c, o), m);
  auto cfg = c.market.config;
  cfg.seed = m.seed;
  auto t = Clock::now();
  const auto sim = market::simulate(cfg, c.market.shocks, c.market.periods, c.market.asymmetry_shift);
  m.stages.push_back({"simulate", sim.periods.size(), 0, ms_since(t)});
  std::ostringstream csv_out;
  report::write_market_csv(sim.periods, csv_out);
  w.write("market.csv", csv_out.str());
  w.write("asymmetry.json",
          report::dump(report::envelope("asymmetry", report::to_json(sim.asymmetry))));

  if (c.market.bridge) {
    t = Clock::now();
    std::vector<market::BridgeResult> runs(c.market.bridge_seeds);
    // Markets inside each bridge run are already parallel; seeds run in order.
    for (std::size_t s = 0; s < runs.size(); ++s) {
      runs[s] = market::bridge(cfg, c.market.bridge_config, m.seed + s);
    }
    Json seeds = Json::array();
    KahanSum plus, minus;
    for (std::size_t s = 0; s < runs.size(); ++s) {
      const auto& r = runs[s].report;
      const double bp = r.coef(*r.index_of("median_rent_plus"));
      const double bm = r.coef(*r.index_of("median_rent_minus"));
      seeds.push_back({{"seed", m.seed + s},
                       {"rent_plus", report::number(bp)},
                       {"rent_minus", report::number(bm)},
                       {"markets_used", runs[s].markets_used},
                       {"markets_dropped", runs[s].markets_dropped}});
      plus += bp;
      minus += bm;
    }
    const double n = static_cast<double>(runs.size());
    Json b;
    b["seeds"] = seeds;
    b["mean_rent_plus"] = report::number(plus.value() / n);
    b["mean_rent_minus"] = report::number(minus.value() / n);
    b["first_report"] = report::to_json(runs.front().report);
    w.write("bridge.json", report::dump(report::envelope("bridge", b)));
    w.write("bridge.txt", report::regression_table({&runs.front().report},
                                                   "Simulated markets: piecewise long difference"));
    m.stages.push_back({"bridge", runs.size(), 0, ms_since(t)});
  }
  return m;
}

RunManifest cmd_validate(const PipelineConfig& c, const RunOptions& o) {
  auto m = start_manifest("validate", c, o);
  OutputWriter w(out_dir(c, o), m);
  auto t = Clock::now();
  const auto series = load_series(c, m);
  std::vector<report::CorrelationRow> rows;
  Json years = Json::array();
  for (int year : c.validate_years) {
    std::vector<double> x, y, lx, ly;
    for (const auto& [msa, _] : series.values) {
      std::string reason;
      const auto cr = panel::resolve(series, msa, year, "crowded_rate", c.derived, &reason);
      const auto ch = panel::resolve(series, msa, year, "chronic_rate", c.derived, &reason);
      if (!cr || !ch) continue;
      x.push_back(*cr);
      y.push_back(*ch);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      lx.push_back(*cr > 0.0 ? std::log(*cr) : nan);
      ly.push_back(*ch > 0.0 ? std::log(*ch) : nan);
    }
    report::CorrelationRow row;
    row.year = year;
    try {
      row.raw = panel::correlation_test(x, y);
      row.logged = panel::correlation_test(lx, ly);
    } catch (const Error& e) {
      throw DataError("validate, year " + std::to_string(year) + ": " + e.what());
    }
    years.push_back({{"year", year}, {"raw", report::to_json(row.raw)}, {"logged", report::to_json(row.logged)}});
    rows.push_back(row);
  }
  const std::vector<std::string> vars{"crowded_rate", "chronic_rate"};
  const auto summary = panel::summary_stats(series, vars, c.validate_years, c.derived);
  Json sj = Json::array();
  for (const auto& s : summary) {
    Json means = Json::object(), logs = Json::object();
    for (std::size_t v = 0; v < vars.size(); ++v) {
      means[vars[v]] = report::number(s.means[v]);
      logs[vars[v]] = report::number(s.log_means[v]);
    }
    sj.push_back({{"year", s.year}, {"count", s.count}, {"means", means}, {"log_means", logs}});
  }
  m.stages.push_back({"validate", rows.size(), 0, ms_since(t)});
  w.write("validate.json", report::dump(report::envelope(
                               "validate", Json{{"correlations", years}, {"summary", sj}})));
  w.write("validate.txt",
          report::correlation_table(rows, "Correlation Tests Between Crowding and Chronic Homelessness") +
              "\n" +
              report::summary_table(summary, {"Crowded Rate", "Chronic Rate"},
                                    "Mean Rates of Crowding and Chronic Homelessness in MSAs by Year"));
  return m;
}

RunManifest run(const std::string& command, const PipelineConfig& config, const RunOptions& options) {
  RunManifest m;
  if (command == "interpolate") {
    m = cmd_interpolate(config, options);
  } else if (command == "panel") {
    m = cmd_panel(config, options);
  } else if (command == "estimate") {
    m = cmd_estimate(config, options);
  } else if (command == "simulate") {
    m = cmd_simulate(config, options);
  } else if (command == "validate") {
    m = cmd_validate(config, options);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  const auto dir = out_dir(config, options);
  std::ofstream out(dir / "manifest.json", std::ios::binary | std::ios::trunc);
  out << manifest_json(m);
  if (!out) throw ConfigError("cannot write '" + (dir / "manifest.json").string() + "'");
  return m;
}

}  // namespace atlas::pipeline
