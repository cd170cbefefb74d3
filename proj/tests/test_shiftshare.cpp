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
#include <cmath>
#include <random>

#include "atlas/error.hpp"
#include "atlas/shiftshare.hpp"
#include "doctest.h"
#include "support/dgp.hpp"

using namespace atlas;
using namespace atlas::shiftshare;

TEST_CASE("bartik examples") {
  CHECK(bartik({{"11", 1.0}}, {{"11", 0.07}}) == doctest::Approx(0.07));
  CHECK(bartik({{"11", 0.5}, {"23", 0.5}}, {{"11", 0.02}, {"23", -0.02}}) == doctest::Approx(0.0).epsilon(1e-15));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    IndustryVector s, g, g2, both;
    for (const char* k : {"11", "23", "31", "44", "52"}) {
      s[k] = u(rng);
      g[k] = 0.031;
      g2[k] = u(rng) - 0.5;
    }
    CHECK(bartik(s, g) == doctest::Approx(0.031).epsilon(1e-14));
    IndustryVector scaled = s;
    for (auto& [_, v] : scaled) v *= 7.0;
    CHECK(bartik(scaled, g2) == doctest::Approx(bartik(s, g2)).epsilon(1e-13));
    for (const auto& [k, v] : g2) both[k] = 2.0 * v + g.at(k);
    CHECK(bartik(s, both) == doctest::Approx(2.0 * bartik(s, g2) + bartik(s, g)).epsilon(1e-12));
  }
}

TEST_CASE("bartik errors") {
  CHECK_THROWS_AS(bartik({{"11", 0.5}, {"23", 0.5}}, {{"11", 0.02}}), DataError);
  try {
    bartik({{"11", 0.5}, {"23", 0.5}}, {{"11", 0.02}});
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("23") != std::string::npos);
  }
  CHECK_THROWS_AS(bartik({{"11", 0.0}}, {{"11", 0.02}}), DataError);
  CHECK(bartik({{"11", 1.0}}, {{"11", 0.02}, {"99", 5.0}}) == doctest::Approx(0.02));
}

TEST_CASE("instrument interactions") {
  for (double v : interact(0.0, {2.0, 0.5, 0.3})) CHECK(v == 0.0);
  const auto a = interact(0.04, {2.0, 0.5, 0.3});
  CHECK(a[0] == 0.04);
  CHECK(a[1] == doctest::Approx(0.08));
  CHECK(a[2] == doctest::Approx(0.02));
  CHECK(a[3] == doctest::Approx(0.012));
}

TEST_CASE("instrument matrix has full column rank with heterogeneous eta") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  IndustryShares shares;
  NationalGrowth growth{{2011, {{"11", 0.05}, {"23", -0.02}, {"31", 0.01}}}};
  SupplyConstraints eta;
  for (int m = 0; m < 6; ++m) {
    const std::string id = "m" + std::to_string(m);
    shares.values[id][2011] = {{"11", u(rng)}, {"23", u(rng)}, {"31", u(rng)}};
    eta[id] = {u(rng) * 2 - 1, u(rng) * 3, u(rng) * 0.5};
  }
  const auto set = build_instruments(shares, growth, eta, {{2011, 2016}});
  REQUIRE(set.rows.size() == 6);
  Eigen::MatrixXd z(6, 4);
  for (int i = 0; i < 6; ++i) {
    for (int k = 0; k < 4; ++k) z(i, k) = set.rows[i].values[k];
  }
  CHECK(Eigen::FullPivLU<Eigen::MatrixXd>(z).rank() == 4);
}

TEST_CASE("missing inputs are logged as drops") {
  IndustryShares shares;
  shares.values["a"][2011] = {{"11", 1.0}};
  shares.values["b"][2011] = {{"11", 1.0}};
  shares.values["c"][2016] = {{"11", 1.0}};
  const NationalGrowth growth{{2011, {{"11", 0.05}}}};
  const SupplyConstraints eta{{"a", {}}, {"c", {}}};
  const auto set = build_instruments(shares, growth, eta, {{2011, 2016}});
  CHECK(set.rows.size() == 1);
  REQUIRE(set.drops.size() == 2);
  CHECK(set.drops[0].msa_id == "b");
  CHECK(set.drops[0].reason == "missing supply constraints");
  CHECK(set.drops[1].reason.rfind("missing industry shares", 0) == 0);
}

TEST_CASE("csv loaders") {
  const auto s = parse_shares_csv("msa_id,year,naics2,share\na,2011,11,0.6\na,2011,23,0.6\n", "s");
  CHECK(s.values.at("a").at(2011).at("11") == doctest::Approx(0.5));
  CHECK(s.warnings.size() == 1);
  CHECK_THROWS_AS(parse_shares_csv("msa_id,year,naics2,share\na,2011,11,-0.1\n", "s"), DataError);
  const auto g = parse_growth_csv("naics2,year,log_growth\n11,2011,0.05\n", "g");
  CHECK(g.at(2011).at("11") == 0.05);
  CHECK_THROWS_AS(parse_eta_csv("msa_id,year,wri,elasticity,undevelopable_share\na,2011,0,1,0\n", "e"),
                  ConfigError);
  CHECK_THROWS_AS(parse_eta_csv("msa_id,wri,elasticity,undevelopable_share\na,0,-1,0\n", "e"), DataError);
  CHECK_THROWS_AS(parse_eta_csv("msa_id,wri,elasticity,undevelopable_share\na,0,1,1.5\n", "e"), DataError);
  const auto e = parse_eta_csv("msa_id,wri,elasticity,undevelopable_share\na,0.3,1.2,0.25\n", "e");
  CHECK(e.at("a").elasticity == 1.2);
}

TEST_CASE("2SLS with instruments equal to regressors is OLS") {
  std::mt19937_64 rng(3);
  auto sys = dgp::iv_system(rng, {.msas = 300});
  sys.instruments = sys.design.x.col(1);
  sys.instrument_names = {"rent"};
  const auto iv = fit_2sls(sys);
  const auto ols = ols::fit(sys.design);
  CHECK((iv.coef - ols.coef).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((iv.vcov - ols.vcov).cwiseAbs().maxCoeff() < 1e-10 * ols.vcov.cwiseAbs().maxCoeff());
  const auto j = hansen_j(sys, iv.coef);
  CHECK_FALSE(j.testable);
  CHECK(j.statistic == 0.0);
  CHECK(j.df == 0);
}

TEST_CASE("first stage strength") {
  std::mt19937_64 rng(4);
  auto sys = dgp::iv_system(rng, {.msas = 500});
  const auto fs = first_stage(sys, 0);
  CHECK(fs.df == 4);
  CHECK(fs.partial_f > 10.0);
  CHECK_FALSE(fs.perfect_fit);
  CHECK(fs.report.n == 500);

  // Exact linear dependence: the infinite-F path.
  auto exact = sys;
  for (Eigen::Index i = 0; i < exact.design.x.rows(); ++i) {
    exact.design.x(i, 1) = exact.instruments.row(i).sum();
  }
  const auto perfect = first_stage(exact, 0);
  CHECK(perfect.perfect_fit);
  CHECK(std::isinf(perfect.partial_f));

  // Orthogonal instruments: partial F averages about one.
  double mean_f = 0.0;
  const int reps = 200;
  for (int r = 0; r < reps; ++r) {
    auto null = dgp::iv_system(rng, {.msas = 200});
    std::normal_distribution<double> z(0.0, 1.0);
    for (Eigen::Index i = 0; i < null.design.x.rows(); ++i) null.design.x(i, 1) = z(rng);
    mean_f += first_stage(null, 0).partial_f / reps;
  }
  CHECK(mean_f > 0.8);
  CHECK(mean_f < 1.3);
}

TEST_CASE("leave-one-out emits one report per dropped instrument") {
  std::mt19937_64 rng(5);
  const auto sys = dgp::iv_system(rng, {.msas = 400});
  const auto all = fit_with_leave_one_out(sys, "iv");
  REQUIRE(all.size() == 5);
  CHECK(all[0].instruments_used.size() == 4);
  for (std::size_t k = 1; k < all.size(); ++k) {
    CHECK(all[k].instruments_used.size() == 3);
    CHECK(all[k].report.n == all[0].report.n);
  }
  CHECK(all[0].hansen.testable);
  CHECK(all[0].hansen.df == 3);
}

TEST_CASE("under-identification is rejected") {
  std::mt19937_64 rng(6);
  auto sys = dgp::iv_system(rng, {.msas = 100});
  sys.endogenous = {0, 1};
  sys.instruments = sys.instruments.leftCols(1).eval();
  sys.instrument_names = {"z1"};
  CHECK_THROWS_AS(fit_iv(sys), NumericalError);
}

TEST_CASE("iv system from a panel") {
  panel::Panel p;
  p.spec.name = "iv";
  p.spec.split = {"median_rent", panel::Transform::kLog, false, ""};
  p.spec.auxiliary = {{"employment", panel::Transform::kLog, false, ""}};
  p.spec.periods = {{2011, 2016}};
  p.period_labels = {"2011-2016"};
  InstrumentSet inst;
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    panel::PanelObservation o;
    o.msa_id = o.cluster = "m" + std::to_string(i);
    o.period = "2011-2016";
    o.split_delta = z(rng);
    o.split_plus = std::max(o.split_delta, 0.0);
    o.split_minus = std::min(o.split_delta, 0.0);
    o.auxiliary = {z(rng)};
    o.period_dummies = {1.0};
    o.outcome_delta = z(rng);
    p.rows.push_back(o);
    if (i < 28) inst.rows.push_back({o.msa_id, o.period, z(rng), {z(rng), z(rng), z(rng), z(rng)}});
  }
  const auto endo = iv_system_from_panel(p, inst, EmploymentMode::kEndogenous);
  CHECK(endo.design.x.rows() == 28);
  CHECK(endo.endogenous.size() == 3);
  CHECK(endo.drops.size() == 2);
  const auto pred = iv_system_from_panel(p, inst, EmploymentMode::kPredictedExogenous);
  CHECK(pred.endogenous.size() == 2);
  CHECK(std::find(pred.design.names.begin(), pred.design.names.end(), "bartik") != pred.design.names.end());
  CHECK(pred.instruments.cols() == 3);
}
