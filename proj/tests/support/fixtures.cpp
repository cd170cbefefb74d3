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
#include "support/fixtures.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "atlas/geojson.hpp"
#include "atlas/numeric.hpp"

namespace atlas::fixtures {
namespace fs = std::filesystem;

StLouis st_louis() {
  StLouis f;
  f.msas.name = "msa";
  f.msas.polygons = {geo::make_polygon("41180", geo::rectangle(0, 0, 10, 10)),
                     geo::make_polygon("16020", geo::rectangle(12, 0, 20, 10))};
  f.cocs.name = "coc";
  f.cocs.polygons = {
      geo::make_polygon("MO-501", geo::rectangle(1, 1, 3, 3)),
      geo::make_polygon("MO-503", geo::rectangle(4, 1, 6, 3)),
      geo::make_polygon("MO-504", geo::rectangle(7, 1, 9, 3)),
      geo::make_polygon("MO-505", geo::rectangle(1, 4, 3, 6)),
      geo::make_polygon("MO-506", geo::rectangle(4, 4, 6, 6)),
      geo::make_polygon("IL-508", geo::rectangle(7, 4, 14, 6)),
      geo::make_polygon("MO-600", geo::rectangle(-3, 7, 3, 9)),
      geo::make_polygon("IL-517", geo::rectangle(4, 7, 16, 9)),
  };
  struct Row {
    const char* id;
    double x, y, pop;
    const char* coc;
    const char* msa;
  };
  const Row rows[] = {
      {"bg01", 1.5, 1.5, 120, "MO-501", "41180"}, {"bg02", 2.5, 2.2, 80, "MO-501", "41180"},
      {"bg03", 2.0, 2.8, 200, "MO-501", "41180"}, {"bg04", 4.5, 1.5, 300, "MO-503", "41180"},
      {"bg05", 5.5, 2.5, 100, "MO-503", "41180"}, {"bg06", 8.0, 2.0, 450, "MO-504", "41180"},
      {"bg07", 1.5, 4.5, 60, "MO-505", "41180"},  {"bg08", 2.5, 5.5, 140, "MO-505", "41180"},
      {"bg09", 2.0, 5.0, 0, "MO-505", "41180"},   {"bg10", 5.0, 5.0, 500, "MO-506", "41180"},
      {"bg11", 4.2, 4.2, 250, "MO-506", "41180"}, {"bg12", 8.0, 5.0, 400, "IL-508", "41180"},
      {"bg13", 11.0, 5.0, 100, "IL-508", ""},     {"bg14", 13.0, 4.5, 300, "IL-508", "16020"},
      {"bg15", 12.5, 5.5, 200, "IL-508", "16020"}, {"bg16", -2.0, 8.0, 250, "MO-600", ""},
      {"bg17", 1.0, 8.0, 150, "MO-600", "41180"}, {"bg18", 2.5, 7.5, 100, "MO-600", "41180"},
      {"bg19", 5.0, 8.0, 300, "IL-517", "41180"}, {"bg20", 9.0, 8.5, 100, "IL-517", "41180"},
      {"bg21", 11.0, 8.0, 50, "IL-517", ""},      {"bg22", 14.0, 8.0, 350, "IL-517", "16020"},
      {"bg23", 15.5, 7.2, 200, "IL-517", "16020"}, {"bg24", 8.0, 9.5, 500, "", "41180"},
      {"bg25", 18.0, 2.0, 300, "", "16020"},
  };
  for (const auto& r : rows) {
    f.points.push_back({r.id, r.x, r.y, r.pop});
    f.point_coc.emplace_back(r.coc);
    f.point_msa.emplace_back(r.msa);
  }
  f.counts[2011] = {{"MO-501", 40},  {"MO-503", 25}, {"MO-504", 12}, {"MO-505", 8},
                    {"MO-506", 30},  {"IL-508", 50}, {"MO-600", 18}, {"IL-517", 64}};
  f.counts[2016] = {{"MO-501", 33},  {"MO-503", 31}, {"MO-504", 9},  {"MO-505", 11},
                    {"MO-506", 27},  {"IL-508", 41}, {"MO-600", 22}, {"IL-517", 57}};
  f.counts[2020] = {{"MO-501", 29},  {"MO-503", 35}, {"MO-504", 14}, {"MO-505", 0},
                    {"MO-506", 19},  {"IL-508", 47}, {"MO-600", 13}, {"IL-517", 71}};
  return f;
}

ManualAllocation manual_allocation(const StLouis& f, int year) {
  std::map<std::string, double> coc_pop;
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    if (!f.point_coc[i].empty()) coc_pop[f.point_coc[i]] += f.points[i].weight;
  }
  ManualAllocation out;
  for (const auto& p : f.msas.polygons) out.msa_totals[p.id] = 0.0;
  const auto& counts = f.counts.at(year);
  for (std::size_t i = 0; i < f.points.size(); ++i) {
    const auto& coc = f.point_coc[i];
    if (coc.empty()) continue;
    const double share = f.points[i].weight / coc_pop.at(coc) * counts.at(coc);
    if (f.point_msa[i].empty()) {
      out.excluded += share;
    } else {
      out.msa_totals[f.point_msa[i]] += share;
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

namespace {

std::string num(double v) { return format_double(v); }

void write_st_louis(const fs::path& dir) {
  const auto f = st_louis();
  write_text(dir / "coc.geojson", geo::to_geojson(f.cocs));
  write_text(dir / "msa.geojson", geo::to_geojson(f.msas));
  std::ostringstream pts;
  pts << "geoid,x,y,population\n";
  for (const auto& p : f.points) pts << p.id << ',' << num(p.x) << ',' << num(p.y) << ',' << num(p.weight) << '\n';
  write_text(dir / "bg.csv", pts.str());
  std::ostringstream counts;
  counts << "region_id,year,count\n";
  for (const auto& [year, totals] : f.counts) {
    for (const auto& [id, c] : totals) counts << id << ',' << year << ',' << num(c) << '\n';
  }
  write_text(dir / "counts.csv", counts.str());
}

}  // namespace

fs::path write_demo(const fs::path& dir, const DemoOptions& options) {
  fs::create_directories(dir);
  write_st_louis(dir);

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> z(0.0, 1.0);
  auto unif = [&](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };

  const std::array<int, 3> years{2011, 2016, 2020};
  const std::map<int, double> deflator{{2011, 1.0}, {2016, 1.07}, {2020, 1.15}};
  const std::array<const char*, 6> industries{"11", "23", "31", "44", "52", "62"};
  std::map<int, std::array<double, 6>> growth;
  for (int t0 : {2011, 2016}) {
    for (auto& g : growth[t0]) g = 0.04 + 0.12 * z(rng);
  }

  std::ostringstream series, shares, eta;
  series << "msa_id,year,chronic_count,population,crowded_units,total_units,median_rent,"
            "median_hh_income,pct_public_assistance,vacancy_rate,unemployment_rate,employment,"
            "income_q1,income_q2,income_q3,income_q4,income_q5,rent_p05,rent_p15,rent_p25,rent_p50\n";
  shares << "msa_id,year,naics2,share\n";
  eta << "msa_id,wri,elasticity,undevelopable_share\n";

  for (std::size_t m = 0; m < options.msas; ++m) {
    char id[16];
    std::snprintf(id, sizeof id, "m%03zu", m + 1);
    const double wri = z(rng);
    const double elasticity = unif(0.6, 3.0);
    const double undevelopable = unif(0.0, 0.6);
    eta << id << ',' << num(wri) << ',' << num(elasticity) << ',' << num(undevelopable) << '\n';

    double pop = unif(2e5, 5e6);
    double rent = unif(700, 1400);  // real dollars
    double income = unif(45000, 80000);
    double chronic = unif(2e-4, 1e-3);
    double crowded = unif(0.01, 0.05);
    double pa = unif(1.0, 5.0);
    double vacancy = unif(0.04, 0.12);
    double unemp = unif(0.03, 0.10);
    double employment = pop * unif(0.4, 0.5);

    for (std::size_t k = 0; k < years.size(); ++k) {
      const int year = years[k];
      const double d = deflator.at(year);
      series << id << ',' << year << ',' << num(chronic * pop) << ',' << num(pop) << ','
             << num(crowded * pop / 2.5) << ',' << num(pop / 2.5) << ',' << num(rent * d) << ','
             << num(income * d) << ',' << num(pa) << ',' << num(vacancy) << ',' << num(unemp)
             << ',' << num(employment);
      for (double q : {0.2, 0.5, 0.9, 1.4, 2.4}) series << ',' << num(income * q * d);
      for (double q : {0.45, 0.6, 0.7, 1.0}) series << ',' << num(rent * q * std::exp(0.02 * z(rng)) * d);
      series << '\n';
      if (k + 1 == years.size()) break;

      // Period dynamics: the Bartik shock moves employment, employment and
      // supply constraints move rents, rents move the homelessness rates.
      std::array<double, 6> s{};
      double total = 0.0;
      for (auto& v : s) total += (v = unif(0.05, 1.0));
      double bartik = 0.0;
      for (std::size_t j = 0; j < s.size(); ++j) {
        s[j] /= total;
        bartik += s[j] * growth[year][j];
        shares << id << ',' << year << ',' << industries[j] << ',' << num(s[j]) << '\n';
      }
      const double d_emp = bartik + 0.03 * z(rng);
      const double d_rent = 0.6 * d_emp * (1.0 + 0.3 * wri) / elasticity + 0.02 + 0.06 * z(rng);
      const double d_pa = 0.5 * z(rng);
      const double d_income = 0.03 + 0.05 * z(rng);
      const double plus = std::max(d_rent, 0.0);
      const double minus = std::min(d_rent, 0.0);
      employment *= std::exp(d_emp);
      rent *= std::exp(d_rent);
      income *= std::exp(d_income);
      pa = std::clamp(pa + d_pa, 0.1, 99.0);
      chronic *= std::exp(1.7 * plus + 0.3 * minus + 0.02 * d_pa + 0.12 * z(rng));
      crowded *= std::exp(2.0 * plus + 0.4 * minus - 0.3 * d_income + 0.1 * z(rng));
      vacancy *= std::exp(-0.5 * d_rent + 0.05 * z(rng));
      unemp = std::clamp(unemp * std::exp(-d_emp + 0.1 * z(rng)), 0.01, 0.5);
      pop *= 1.0 + unif(-0.01, 0.05);
    }
  }

  std::ostringstream defl, grow;
  defl << "year,deflator\n";
  for (const auto& [y, v] : deflator) defl << y << ',' << num(v) << '\n';
  grow << "naics2,year,log_growth\n";
  for (const auto& [t0, g] : growth) {
    for (std::size_t j = 0; j < g.size(); ++j) grow << industries[j] << ',' << t0 << ',' << num(g[j]) << '\n';
  }
  write_text(dir / "series.csv", series.str());
  write_text(dir / "deflator.csv", defl.str());
  write_text(dir / "shares.csv", shares.str());
  write_text(dir / "growth.csv", grow.str());
  write_text(dir / "eta.csv", eta.str());

  nlohmann::ordered_json cfg;
  cfg["output_dir"] = "out";
  cfg["seed"] = 11;
  cfg["interpolation"] = {{"source_geometries", "coc.geojson"},
                          {"target_geometries", "msa.geojson"},
                          {"points", "bg.csv"},
                          {"counts", "counts.csv"}};
  cfg["panel"] = {{"series", "series.csv"}, {"deflator", "deflator.csv"}};
  cfg["estimate"] = {{"presets", {"table3", "table5", "iv-main"}}};
  cfg["iv"] = {{"eta", "eta.csv"}, {"industry_shares", "shares.csv"}, {"national_growth", "growth.csv"}};
  if (options.market) {
    cfg["market"] = {{"agents", 2000},
                     {"periods", 10},
                     {"shocks", {{"6", 0.9}}},
                     {"bridge", {{"seeds", 2}, {"markets", 40}, {"agents", 300}}}};
  }
  write_text(dir / "config.json", cfg.dump(2) + "\n");
  return dir / "config.json";
}

}  // namespace atlas::fixtures
