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
// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <omp.h>

#include "atlas/csv.hpp"
#include "atlas/interpolate.hpp"
#include "atlas/market.hpp"
#include "atlas/ols.hpp"
#include "atlas/pipeline.hpp"
#include "atlas/qdgmm.hpp"
#include "atlas/shiftshare.hpp"
#include "oracles.hpp"
#include "support/dgp.hpp"
#include "support/fixtures.hpp"

using namespace atlas;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kInterpRelTol = 1e-9;
constexpr double kInterpBudgetS = 5.0;
constexpr std::size_t kMassFixtures = 1000;
constexpr std::size_t kPerfPoints = 217740;
constexpr std::size_t kPerfPolygonsPerLayer = 400;
constexpr double kPerfBudgetS = 30.0;
constexpr int kPerfThreads = 8;
constexpr std::size_t kOlsDesigns = 100;
constexpr double kOlsTol = 1e-10;
constexpr int kWaldReps = 500;
constexpr double kWaldLo = 0.03, kWaldHi = 0.08;
constexpr double kWaldBudgetS = 60.0;
constexpr double kQdExactTol = 1e-8;
constexpr int kQdReps = 200;
constexpr std::size_t kQdMsas = 2000;
constexpr double kQdMcSes = 3.0;
constexpr double kQdFdStep = 1e-6, kQdFdTol = 1e-5;
constexpr double kQdBudgetS = 300.0;
constexpr int kIvReps = 200;
constexpr std::size_t kIvMsas = 2000;
constexpr double kIvBiasSes = 5.0, kIvMcSes = 3.0;
constexpr double kJSizeLo = 0.02, kJSizeHi = 0.09, kJPower = 0.5;
constexpr double kIvOlsTol = 1e-10;
constexpr double kBidTol = 1e-10;
constexpr int kBridgeSeeds = 50;
constexpr double kBridgeMinusShare = 0.2;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += (ok ? "" : "FAILED ") + what;
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("atlas_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

// --- 1 ---------------------------------------------------------------------

Outcome interpolation_oracle() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const auto dir = scratch("interp");
  const auto cfg = pipeline::load_config(fixtures::write_demo(dir, {.msas = 3, .seed = 1, .market = false}));
  pipeline::RunOptions opt;
  opt.out_dir = dir / "out";
  pipeline::run("interpolate", cfg, opt);
  const auto f = fixtures::st_louis();
  const auto table = csv::read_file(dir / "out" / "interpolated_counts.csv");
  double worst = 0.0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto manual = fixtures::manual_allocation(f, static_cast<int>(table.integer(r, table.column("year"))));
    worst = std::max(worst, rel(table.number(r, table.column("count")),
                                manual.msa_totals.at(table.cell(r, table.column("target_id")))));
  }
  o.require(table.size() == 6 && worst <= kInterpRelTol, "fixture max rel err " + fmt(worst));

  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_mass = 0.0;
  for (std::size_t k = 0; k < kMassFixtures; ++k) {
    // Source: vertical strips; target: horizontal strips covering part of the extent.
    const int ns = 2 + static_cast<int>(u(rng) * 6), nt = 1 + static_cast<int>(u(rng) * 5);
    geo::RegionSet src, tgt;
    for (int i = 0; i < ns; ++i) {
      src.polygons.push_back(geo::make_polygon("s" + std::to_string(i), geo::rectangle(i, 0, i + 1, 10)));
    }
    const double cover = 10.0 * (0.5 + 0.5 * u(rng));
    for (int j = 0; j < nt; ++j) {
      const double y0 = cover * j / nt, y1 = cover * (j + 1) / nt;
      tgt.polygons.push_back(geo::make_polygon("t" + std::to_string(j), geo::rectangle(-1, y0, ns + 1, y1)));
    }
    std::vector<geo::WeightedPoint> pts;
    const int np = 10 + static_cast<int>(u(rng) * 60);
    for (int p = 0; p < np; ++p) pts.push_back({"p" + std::to_string(p), u(rng) * ns, u(rng) * 10, u(rng) * 1000});
    std::map<int, double> pop;
    for (const auto& p : pts) pop[std::min(ns - 1, static_cast<int>(p.x))] += p.weight;
    interpolate::RegionTotals totals;
    double source_mass = 0.0;
    for (int i = 0; i < ns; ++i) {
      const double h = pop[i] > 0.0 ? std::floor(u(rng) * 500) : 0.0;
      totals["s" + std::to_string(i)] = h;
      source_mass += h;
    }
    const auto r = interpolate::interpolate_counts(src, tgt, pts, {{2020, totals}});
    double mapped = r.years[0].target.excluded_mass;
    for (const auto& [_, h] : r.years[0].target.totals) mapped += h;
    worst_mass = std::max(worst_mass, std::abs(mapped - source_mass) / std::max(1.0, source_mass));
  }
  o.require(worst_mass <= kInterpRelTol, "mass conservation over " + std::to_string(kMassFixtures) +
                                             " fixtures, max rel err " + fmt(worst_mass));
  const double secs = seconds_since(start);
  o.require(secs < kInterpBudgetS, "runtime " + fmt(secs, 3) + " s");
  return o;
}

// --- 2 ---------------------------------------------------------------------

Outcome performance_fixture() {
  Outcome o;
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(kPerfPolygonsPerLayer))));
  geo::RegionSet src, tgt;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      src.polygons.push_back(geo::make_polygon("c" + std::to_string(i * side + j),
                                               geo::rectangle(i, j, i + 1, j + 1)));
      // Target cells are offset by half a cell so every source straddles.
      tgt.polygons.push_back(geo::make_polygon("m" + std::to_string(i * side + j),
                                               geo::rectangle(i + 0.5, j + 0.5, i + 1.5, j + 1.5)));
    }
  }
  std::mt19937_64 rng(217740);
  std::uniform_real_distribution<double> u(0.0, side);
  std::uniform_real_distribution<double> w(0.0, 3000.0);
  std::vector<geo::WeightedPoint> pts;
  pts.reserve(kPerfPoints);
  for (std::size_t k = 0; k < kPerfPoints; ++k) pts.push_back({"bg" + std::to_string(k), u(rng), u(rng), w(rng)});
  interpolate::RegionTotals totals;
  for (const auto& p : src.polygons) totals[p.id] = 100.0;

  omp_set_num_threads(1);
  const auto start = std::chrono::steady_clock::now();
  const auto serial = interpolate::interpolate_counts(src, tgt, pts, {{2010, totals}});
  const double secs = seconds_since(start);
  omp_set_num_threads(kPerfThreads);
  const auto parallel = interpolate::interpolate_counts(src, tgt, pts, {{2010, totals}});
  omp_set_num_threads(1);
  o.require(secs < kPerfBudgetS, fmt(kPerfPoints, 6) + " points x " + std::to_string(2 * side * side) +
                                     " polygons single-threaded in " + fmt(secs, 3) + " s");
  bool same = serial.years[0].target.totals == parallel.years[0].target.totals &&
              serial.years[0].target.excluded_mass == parallel.years[0].target.excluded_mass &&
              serial.diagnostics.target_point_counts == parallel.diagnostics.target_point_counts;
  o.require(same, "identical output with " + std::to_string(kPerfThreads) + " threads");
  return o;
}

// --- 3 ---------------------------------------------------------------------

oracle::Mat to_mat(const Eigen::MatrixXd& m) {
  oracle::Mat out(m.rows(), oracle::Vec(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  }
  return out;
}

double mat_rel(const Eigen::MatrixXd& a, const oracle::Mat& b) {
  double diff = 0.0, scale = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      diff = std::max(diff, std::abs(a(i, j) - b[i][j]));
      scale = std::max(scale, std::abs(b[i][j]));
    }
  }
  return diff / std::max(scale, 1e-300);
}

Outcome ols_oracle() {
  Outcome o;
  std::mt19937_64 rng(33);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_beta = 0.0, worst_v = 0.0, worst_hc1 = 0.0;
  for (std::size_t rep = 0; rep < kOlsDesigns; ++rep) {
    const int k = 2 + static_cast<int>(rng() % 5);       // 2..6
    const int g = 5 + static_cast<int>(rng() % 6);       // 5..10
    const int n = std::max(k + 2, g) + static_cast<int>(rng() % (51 - std::max(k + 2, g)));  // <= 50
    ols::DesignMatrix d;
    d.x.resize(n, k);
    d.y.resize(n);
    for (int i = 0; i < n; ++i) {
      d.x(i, 0) = 1.0;
      for (int j = 1; j < k; ++j) d.x(i, j) = z(rng);
      d.y(i) = d.x.row(i).sum() * 0.4 + z(rng);
      d.clusters.push_back("g" + std::to_string(i < g ? i : static_cast<int>(rng() % g)));
    }
    for (int j = 0; j < k; ++j) d.names.push_back("x" + std::to_string(j));
    const auto r = ols::fit(d);
    const auto x = to_mat(d.x);
    const std::vector<double> y(d.y.data(), d.y.data() + n);
    const auto beta = oracle::normal_equations(x, y);
    std::vector<double> e(n);
    for (int i = 0; i < n; ++i) {
      e[i] = y[i];
      for (int j = 0; j < k; ++j) e[i] -= x[i][j] * beta[j];
    }
    for (int j = 0; j < k; ++j) worst_beta = std::max(worst_beta, rel(r.coef(j), beta[j]));
    worst_v = std::max(worst_v, mat_rel(r.vcov, oracle::cluster_sandwich(x, e, d.clusters)));

    auto single = d;
    for (int i = 0; i < n; ++i) single.clusters[i] = "s" + std::to_string(i);
    worst_hc1 = std::max(worst_hc1, mat_rel(ols::fit(single).vcov, oracle::hc1(x, e)));
  }
  o.require(worst_beta <= kOlsTol, "beta max rel err " + fmt(worst_beta));
  o.require(worst_v <= kOlsTol, "clustered V max rel err " + fmt(worst_v));
  o.require(worst_hc1 <= kOlsTol, "singleton-cluster V vs HC1 " + fmt(worst_hc1));
  return o;
}

// --- 4 ---------------------------------------------------------------------

Outcome wald_size() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(44);
  int rejections = 0;
  for (int rep = 0; rep < kWaldReps; ++rep) {
    const auto d = dgp::equal_split(rng, 200, 1.5);
    const auto r = ols::fit(d);
    if (ols::test_equal(r, "rent_plus", "rent_minus").p_value < 0.05) ++rejections;
  }
  const double rate = static_cast<double>(rejections) / kWaldReps;
  o.require(rate >= kWaldLo && rate <= kWaldHi, "rejection rate " + fmt(rate) + " over " +
                                                    std::to_string(kWaldReps) + " replications");
  const double secs = seconds_since(start);
  o.require(secs < kWaldBudgetS, "runtime " + fmt(secs, 3) + " s");
  return o;
}

// --- 5 ---------------------------------------------------------------------

Outcome qd_recovery() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Eigen::VectorXd beta(4);
  beta << 0.5, -0.3, 0.1, -0.05;
  std::mt19937_64 rng(55);

  const auto exact = qdgmm::fit_qd(dgp::qd_panel(rng, 200, beta, false));
  const double exact_err = (exact.report.coef - beta).cwiseAbs().maxCoeff();
  o.require(exact_err <= kQdExactTol, "noiseless max err " + fmt(exact_err));

  Eigen::MatrixXd draws(kQdReps, 4);
  for (int rep = 0; rep < kQdReps; ++rep) {
    draws.row(rep) = qdgmm::fit_qd(dgp::qd_panel(rng, kQdMsas, beta, true)).report.coef.transpose();
  }
  const Eigen::RowVectorXd mean = draws.colwise().mean();
  double worst_ratio = 0.0;
  for (int j = 0; j < 4; ++j) {
    const double sd = std::sqrt((draws.col(j).array() - mean(j)).square().sum() / (kQdReps - 1));
    worst_ratio = std::max(worst_ratio, std::abs(mean(j) - beta(j)) / (sd / std::sqrt(kQdReps)));
  }
  o.require(worst_ratio <= kQdMcSes, "noisy recovery worst |bias|/MC-SE " + fmt(worst_ratio));

  const auto data = dgp::qd_panel(rng, 100, beta, true);
  std::normal_distribution<double> z(0.0, 0.4);
  double worst_fd = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    oracle::Vec at(4);
    for (auto& v : at) v = z(rng);
    const auto fd = oracle::finite_difference_jacobian(
        [&](const oracle::Vec& b) {
          const auto m = qdgmm::sample_moments(Eigen::Map<const Eigen::VectorXd>(b.data(), 4), data);
          return oracle::Vec(m.data(), m.data() + m.size());
        },
        at, kQdFdStep);
    const auto j = qdgmm::moment_jacobian(Eigen::Map<const Eigen::VectorXd>(at.data(), 4), data);
    double scale = 0.0, diff = 0.0;
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) {
        scale = std::max(scale, std::abs(fd[r][c]));
        diff = std::max(diff, std::abs(j(r, c) - fd[r][c]));
      }
    }
    worst_fd = std::max(worst_fd, diff / scale);
  }
  o.require(worst_fd <= kQdFdTol, "Jacobian vs finite differences rel " + fmt(worst_fd));

  std::uniform_real_distribution<double> u(0.05, 20.0);
  auto rescale = [&](qdgmm::QDData d) {
    std::map<std::string, double> c;
    for (auto& p : d.pairs) {
      auto [it, fresh] = c.try_emplace(p.msa_id, 0.0);
      if (fresh) it->second = u(rng);
      p.y_t *= it->second;
      p.y_prev *= it->second;
    }
    return d;
  };
  // Exact invariance needs the moments to hold MSA by MSA, as on a noiseless
  // panel. On noisy panels the rescaling reweights MSAs; that shift is
  // reported in standard-error units.
  const auto clean = dgp::qd_panel(rng, 200, beta, false);
  const double fe = (qdgmm::fit_qd(rescale(clean)).report.coef - qdgmm::fit_qd(clean).report.coef).cwiseAbs().maxCoeff();
  o.require(fe <= kQdExactTol, "fixed-effect rescaling max diff " + fmt(fe));
  const auto noisy = dgp::qd_panel(rng, kQdMsas, beta, true);
  const auto base = qdgmm::fit_qd(noisy);
  const auto moved = qdgmm::fit_qd(rescale(noisy));
  const double shift = ((moved.report.coef - base.report.coef).array() / base.report.se.array()).abs().maxCoeff();
  o.require(true, "noisy-panel rescaling shift " + fmt(shift) + " SEs (not exact by construction)");
  const double secs = seconds_since(start);
  o.require(secs < kQdBudgetS, "runtime " + fmt(secs, 3) + " s");
  return o;
}

// --- 6 ---------------------------------------------------------------------

Outcome iv_correctness() {
  Outcome o;
  std::mt19937_64 rng(66);
  const double beta = 2.0;
  std::vector<double> iv, ols_bias_in_se;
  int j_reject = 0;
  for (int rep = 0; rep < kIvReps; ++rep) {
    const auto sys = dgp::iv_system(rng, {.msas = kIvMsas, .beta = beta});
    const auto ols = ols::fit(sys.design);
    ols_bias_in_se.push_back((ols.coef(1) - beta) / ols.se(1));
    const auto fit = shiftshare::fit_iv(sys);
    iv.push_back(fit.report.coef(1));
    if (fit.hansen.p_value < 0.05) ++j_reject;
  }
  double mean_bias = 0.0, mean_iv = 0.0;
  for (int r = 0; r < kIvReps; ++r) mean_bias += ols_bias_in_se[r] / kIvReps, mean_iv += iv[r] / kIvReps;
  double var = 0.0;
  for (double v : iv) var += (v - mean_iv) * (v - mean_iv) / (kIvReps - 1);
  const double mc_se = std::sqrt(var / kIvReps);
  o.require(mean_bias >= kIvBiasSes, "OLS bias " + fmt(mean_bias) + " SEs");
  o.require(std::abs(mean_iv - beta) <= kIvMcSes * mc_se,
            "2SLS |bias| " + fmt(std::abs(mean_iv - beta) / mc_se) + " MC-SEs");

  const double size = static_cast<double>(j_reject) / kIvReps;
  o.require(size >= kJSizeLo && size <= kJSizeHi, "Hansen J size " + fmt(size));
  int power_hits = 0;
  for (int rep = 0; rep < kIvReps; ++rep) {
    const auto sys = dgp::iv_system(rng, {.msas = kIvMsas, .beta = beta, .invalid = 0.1});
    if (shiftshare::fit_iv(sys).hansen.p_value < 0.05) ++power_hits;
  }
  const double power = static_cast<double>(power_hits) / kIvReps;
  o.require(power > kJPower, "Hansen J power " + fmt(power));

  auto same = dgp::iv_system(rng, {.msas = 500, .beta = beta});
  same.instruments = same.design.x.col(1);
  same.instrument_names = {"rent"};
  const auto a = shiftshare::fit_2sls(same);
  const auto b = ols::fit(same.design);
  const double diff = std::max((a.coef - b.coef).cwiseAbs().maxCoeff(),
                               (a.vcov - b.vcov).cwiseAbs().maxCoeff() / b.vcov.cwiseAbs().maxCoeff());
  o.require(diff <= kIvOlsTol, "instruments = regressors vs OLS " + fmt(diff));

  const auto loo = shiftshare::fit_with_leave_one_out(dgp::iv_system(rng, {.msas = 500}), "iv");
  o.require(loo.size() == 5, "leave-one-out extra reports " + std::to_string(loo.size() - 1));
  return o;
}

// --- 7 ---------------------------------------------------------------------

Outcome market_model() {
  Outcome o;
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    market::UtilityParams p;
    p.a = 0.2 + 2.8 * u(rng);
    p.h_min = 0.2 + 1.8 * u(rng);
    p.h_next = p.h_min + 0.2 + 2.0 * u(rng);
    p.p_next = 20.0 + 200.0 * u(rng);
    const market::UtilityFn fn = [a = p.a](double h, double x) { return market::utility(h, x, a); };
    const double y = 1.0 + 400.0 * u(rng);
    worst = std::max(worst, rel(market::bid_rent_homeless_bisect(y, p.h_min, fn),
                                market::bid_rent_homeless(y, p.h_min, p)));
    const double price = 50.0 * u(rng);
    worst = std::max(worst, rel(market::cutoff_income_bisect(price, p, fn), market::cutoff_income(price, p)));
    // Marginal bid: pick an income with a nonnegative root.
    const double ratio = std::pow((1 + p.a * p.h_next) / (1 + p.a * p.h_min), 2);
    const double y_max = p.p_next * ratio / (ratio - 1.0);
    const double ym = p.p_next + (y_max - p.p_next) * (0.01 + 0.98 * u(rng));
    worst = std::max(worst, rel(market::bid_rent_marginal_bisect(ym, p, fn), market::bid_rent_marginal(ym, p)));
  }
  o.require(worst <= kBidTol, "bisection vs closed form " + fmt(worst));

  market::UtilityParams p;
  bool slope_ok = true;
  for (int i = 1; i <= 50; ++i) {
    const double y = 4.0 * i;
    const double h = 1e-4 * y;
    const double s = (market::bid_rent_homeless(y + h, p.h_min, p) - market::bid_rent_homeless(y, p.h_min, p)) / h;
    slope_ok = slope_ok && s > 0.0 && s < 1.0;
  }
  o.require(slope_ok, "B^H slope in (0,1) on 50 incomes");

  const double cutoff = market::cutoff_income(30.0, p);
  std::vector<market::Agent> agents;
  const std::vector<double> incomes{35.0, 39.99, 40.01, 45.0, 60.0};
  for (std::size_t i = 0; i < incomes.size(); ++i) agents.push_back({i, incomes[i], false});
  // Supply jumps from 0 to 100 units just below a price of 30.
  const market::SupplyCurve s({{29.999, 0.0}, {30.0, 100.0}});
  const auto eq = market::equilibrium(market::demand_curve(agents, p), s);
  const std::vector<std::size_t> expect_homeless{0, 1};
  o.require(std::abs(cutoff - 40.0) < 1e-12 && eq.homeless == expect_homeless,
            "cutoff " + fmt(cutoff, 10) + ", homeless below it at price " + fmt(eq.price));

  const auto sim = market::simulate(market::default_config(), {}, 8);
  const auto& a = sim.asymmetry;
  o.require(a.inward.d_homeless > -a.outward.d_homeless && a.outward.d_homeless <= 0.0,
            "inward +" + fmt(a.inward.d_homeless) + " vs outward " + fmt(a.outward.d_homeless));

  double plus = 0.0, minus = 0.0;
  bool every_seed = true;
  for (int seed = 1; seed <= kBridgeSeeds; ++seed) {
    const auto r = market::bridge(market::default_config(), {}, static_cast<std::uint64_t>(seed)).report;
    const double bp = r.coef(r.index_of("median_rent_plus").value()),
                 bm = r.coef(r.index_of("median_rent_minus").value());
    plus += bp / kBridgeSeeds;
    minus += bm / kBridgeSeeds;
    every_seed = every_seed && bp > 0.0 && std::abs(bm) < kBridgeMinusShare * bp;
  }
  o.require(plus > 0.0 && std::abs(minus) < kBridgeMinusShare * plus,
            "bridge mean rent_plus " + fmt(plus) + ", rent_minus " + fmt(minus));
  o.require(every_seed, "bridge condition holds for each of " + std::to_string(kBridgeSeeds) + " seeds");
  return o;
}

// --- 8 ---------------------------------------------------------------------

void strip_wall_clock(nlohmann::json& j) {
  if (j.is_object()) {
    j.erase("wall_ms");
    for (auto& [_, v] : j.items()) strip_wall_clock(v);
  } else if (j.is_array()) {
    for (auto& v : j) strip_wall_clock(v);
  }
}

Outcome determinism() {
  Outcome o;
  const auto dir = scratch("determinism");
  const auto cfg = pipeline::load_config(fixtures::write_demo(dir));
  std::size_t files = 0;
  bool identical = true;
  for (const std::string cmd : {"interpolate", "panel", "estimate", "simulate", "validate"}) {
    pipeline::RunOptions a, b;
    a.out_dir = dir / ("a_" + cmd);
    b.out_dir = dir / ("b_" + cmd);
    const auto ma = pipeline::run(cmd, cfg, a);
    pipeline::run(cmd, cfg, b);
    for (const auto& f : ma.outputs) {
      ++files;
      if (slurp(*a.out_dir / f.path) != slurp(*b.out_dir / f.path)) {
        identical = false;
        o.require(false, cmd + "/" + f.path + " differs");
      }
    }
    auto ja = nlohmann::json::parse(slurp(*a.out_dir / "manifest.json"));
    auto jb = nlohmann::json::parse(slurp(*b.out_dir / "manifest.json"));
    strip_wall_clock(ja);
    strip_wall_clock(jb);
    if (ja != jb) {
      identical = false;
      o.require(false, cmd + " manifest differs beyond wall-clock fields");
    }
  }
  o.require(identical, std::to_string(files) + " outputs across 5 commands byte-identical");
  return o;
}

}  // namespace

int main() {
  omp_set_num_threads(1);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"Interpolation oracle", interpolation_oracle},
      {"Performance fixture", performance_fixture},
      {"OLS oracle equivalence", ols_oracle},
      {"Wald size", wald_size},
      {"Quasi-differenced GMM recovery", qd_recovery},
      {"IV correctness", iv_correctness},
      {"Market model", market_model},
      {"Determinism", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    if (!out.pass) ++failures;
    std::printf("[%s] %zu %s (%.1f s): %s\n", out.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                seconds_since(start), out.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
