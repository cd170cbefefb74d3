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
#include "atlas/market.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>

#include "atlas/error.hpp"
#include "atlas/numeric.hpp"
#include "atlas/panel.hpp"

namespace atlas::market {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Root of a decreasing function on [lo, hi] with f(lo) >= 0 >= f(hi).
template <typename F>
double bisect_decreasing(F f, double lo, double hi) {
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (f(mid) >= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double quality_ratio(const UtilityParams& p) {
  const double r = (1.0 + p.a * p.h_next) / (1.0 + p.a * p.h_min);
  return r * r;
}

Rng market_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

}  // namespace

void validate(const UtilityParams& p) {
  if (!(p.a > 0.0) || !std::isfinite(p.a)) throw ConfigError("market: a must be positive");
  if (!(p.h_min > 0.0)) throw ConfigError("market: H_min must be positive");
  if (!(p.h_next > p.h_min) || !std::isfinite(p.h_next)) {
    throw ConfigError("market: H_next must exceed H_min");
  }
  if (!(p.p_next > 0.0) || !std::isfinite(p.p_next)) {
    throw ConfigError("market: P(H_next) must be positive");
  }
}

double utility(double h, double x, double a) { return (1.0 + a * h) * std::sqrt(x); }

double bid_rent_homeless(double income, double h, const UtilityParams& params) {
  if (!(income > 0.0) || !std::isfinite(income)) {
    throw DataError("bid_rent_homeless: income must be positive");
  }
  if (!(h >= 0.0)) throw DataError("bid_rent_homeless: quality must be >= 0");
  const double s = 1.0 + params.a * h;
  return income * (1.0 - 1.0 / (s * s));
}

double bid_rent_homeless_bisect(double income, double h, const UtilityFn& u) {
  if (!(income > 0.0) || !std::isfinite(income)) {
    throw DataError("bid_rent_homeless_bisect: income must be positive");
  }
  const double target = u(0.0, income);
  return bisect_decreasing([&](double b) { return u(h, income - b) - target; }, 0.0, income);
}

double bid_rent_marginal(double income, const UtilityParams& params) {
  if (!(income > params.p_next)) {
    throw DataError("bid_rent_marginal: income does not exceed P(H_next)");
  }
  const double b = income - (income - params.p_next) * quality_ratio(params);
  if (b < 0.0) {
    throw NumericalError("bid_rent_marginal: no root in [0, Y) (B1 = " + format_double(b) +
                         "); the agent never demands H_min");
  }
  return b;
}

double bid_rent_marginal_bisect(double income, const UtilityParams& params, const UtilityFn& u) {
  if (!(income > params.p_next)) {
    throw DataError("bid_rent_marginal_bisect: income does not exceed P(H_next)");
  }
  const double target = u(params.h_next, income - params.p_next);
  auto f = [&](double b) { return u(params.h_min, income - b) - target; };
  if (f(0.0) < 0.0) throw NumericalError("bid_rent_marginal_bisect: no root in [0, Y)");
  return bisect_decreasing(f, 0.0, income);
}

double cutoff_income(double p_min, const UtilityParams& params) {
  if (!(p_min >= 0.0)) throw DataError("cutoff_income: negative price");
  const double s = 1.0 + params.a * params.h_min;
  return p_min / (1.0 - 1.0 / (s * s));
}

double cutoff_income_bisect(double p_min, const UtilityParams& params, const UtilityFn& u) {
  if (!(p_min >= 0.0)) throw DataError("cutoff_income_bisect: negative price");
  if (p_min == 0.0) return 0.0;
  auto g = [&](double y) { return bid_rent_homeless_bisect(y, params.h_min, u) - p_min; };
  double hi = p_min;
  while (g(hi) < 0.0) {
    hi *= 2.0;
    if (!std::isfinite(hi)) throw NumericalError("cutoff_income_bisect: no bracket");
  }
  // g increasing: bisect on -g.
  return bisect_decreasing([&](double y) { return -g(y); }, 0.0, hi);
}

Bid agent_bid(const Agent& agent, const UtilityParams& params, bool* participates) {
  Bid b;
  b.agent_id = agent.id;
  b.bid = bid_rent_homeless(agent.income, params.h_min, params);
  b.margin = Margin::kHomeless;
  *participates = true;
  if (agent.income > params.p_next) {
    const double b1 = agent.income - (agent.income - params.p_next) * quality_ratio(params);
    if (b1 < 0.0) {
      *participates = false;
    } else if (b1 < b.bid) {
      b.bid = b1;
      b.margin = Margin::kQuality;
    }
  }
  return b;
}

Demand demand_curve(const std::vector<Agent>& agents, const UtilityParams& params) {
  Demand d;
  d.bids.reserve(agents.size());
  for (const auto& a : agents) {
    bool participates = false;
    const Bid b = agent_bid(a, params, &participates);
    if (participates) {
      d.bids.push_back(b);
    } else {
      d.non_participants.push_back(a.id);
    }
  }
  std::sort(d.bids.begin(), d.bids.end(), [](const Bid& x, const Bid& y) {
    if (x.bid != y.bid) return x.bid > y.bid;
    return x.agent_id < y.agent_id;
  });
  std::sort(d.non_participants.begin(), d.non_participants.end());
  return d;
}

SupplyCurve::SupplyCurve(std::vector<std::pair<double, double>> points) : points_(std::move(points)) {
  if (points_.empty()) throw ConfigError("supply: no points");
  for (std::size_t i = 0; i < points_.size(); ++i) {
    const auto [p, q] = points_[i];
    if (!std::isfinite(p) || !std::isfinite(q) || p < 0.0 || q < 0.0) {
      throw ConfigError("supply: prices and quantities must be finite and >= 0");
    }
    if (i > 0 && !(p > points_[i - 1].first)) {
      throw ConfigError("supply: prices must be strictly increasing");
    }
    if (i > 0 && q < points_[i - 1].second) throw ConfigError("supply: quantity must be nondecreasing");
  }
}

SupplyCurve SupplyCurve::vertical(double quantity) { return SupplyCurve({{0.0, quantity}}); }

double SupplyCurve::quantity(double price) const {
  if (price <= points_.front().first) return points_.front().second;
  if (price >= points_.back().first) return points_.back().second;
  auto it = std::upper_bound(points_.begin(), points_.end(), price,
                             [](double p, const auto& pt) { return p < pt.first; });
  const auto& [p1, q1] = *it;
  const auto& [p0, q0] = *(it - 1);
  return q0 + (price - p0) / (p1 - p0) * (q1 - q0);
}

double SupplyCurve::min_price(double q) const {
  if (q <= points_.front().second) return 0.0;
  if (q > points_.back().second) return kInf;
  for (std::size_t j = 0; j + 1 < points_.size(); ++j) {
    const auto [p0, q0] = points_[j];
    const auto [p1, q1] = points_[j + 1];
    if (q0 < q && q <= q1) return p0 + (q - q0) / (q1 - q0) * (p1 - p0);
  }
  return kInf;
}

SupplyCurve SupplyCurve::scaled(double factor) const {
  if (!(factor >= 0.0) || !std::isfinite(factor)) throw ConfigError("supply: invalid scale");
  auto pts = points_;
  for (auto& [_, q] : pts) q *= factor;
  return SupplyCurve(std::move(pts));
}

Equilibrium equilibrium(const Demand& demand, const SupplyCurve& supply) {
  const auto& bids = demand.bids;
  const std::size_t n = bids.size();
  auto b = [&](std::size_t q) { return bids[q - 1].bid; };
  std::size_t q_star = 0;
  while (q_star < n && b(q_star + 1) >= supply.min_price(static_cast<double>(q_star + 1))) ++q_star;

  Equilibrium eq;
  eq.quantity = q_star;
  if (q_star == 0) {
    eq.no_trade = true;
    const double p1 = supply.min_price(1.0);
    eq.price = n == 0 ? (std::isfinite(p1) ? p1 : 0.0) : (std::isfinite(p1) ? std::max(b(1), p1) : b(1));
  } else {
    const double lo = q_star < n ? b(q_star + 1) : 0.0;
    const double hi = b(q_star);
    eq.price = std::clamp(supply.min_price(static_cast<double>(q_star + 1)), lo, hi);
    eq.excess_supply = q_star == n && eq.price == 0.0;
  }
  for (std::size_t r = q_star; r < n; ++r) {
    (bids[r].margin == Margin::kHomeless ? eq.homeless : eq.upgraded).push_back(bids[r].agent_id);
  }
  std::sort(eq.homeless.begin(), eq.homeless.end());
  std::sort(eq.upgraded.begin(), eq.upgraded.end());
  return eq;
}

void validate(const MarketConfig& c) {
  validate(c.utility);
  if (c.agents == 0) throw ConfigError("market: need at least one agent");
  if (!(c.delta <= 0.0)) throw ConfigError("market: delta must not be positive");
  if (!(c.epsilon_half_width >= 0.0)) throw ConfigError("market: epsilon half-width must be >= 0");
  if (!(c.income_floor > 0.0)) throw ConfigError("market: income floor must be positive");
  if (!(c.income_log_sd >= 0.0) || !std::isfinite(c.income_log_mean)) {
    throw ConfigError("market: invalid income distribution");
  }
  if (c.supply.points().empty()) throw ConfigError("market: supply curve missing");
}

MarketConfig default_config() {
  MarketConfig c;
  c.agents = 10000;
  c.supply = SupplyCurve({{0.0, 0.80 * 10000}, {100.0, 1.00 * 10000}});
  return c;
}

std::vector<Agent> initial_agents(const MarketConfig& config, Rng& rng) {
  std::lognormal_distribution<double> dist(config.income_log_mean, config.income_log_sd);
  std::vector<Agent> agents(config.agents);
  for (std::size_t i = 0; i < agents.size(); ++i) {
    agents[i].id = i;
    agents[i].income = std::max(dist(rng), config.income_floor);
  }
  return agents;
}

void step_dynamics(std::vector<Agent>& agents, const MarketConfig& config, Rng& rng) {
  std::uniform_real_distribution<double> eps(-config.epsilon_half_width, config.epsilon_half_width);
  for (auto& a : agents) {
    const double e = config.epsilon_half_width > 0.0 ? eps(rng) : 0.0;
    a.income = std::max(a.income + (a.homeless ? config.delta : 0.0) + e, config.income_floor);
    a.homeless = false;
  }
}

void apply_equilibrium(const Equilibrium& eq, std::vector<Agent>& agents) {
  for (auto& a : agents) a.homeless = false;
  for (auto id : eq.homeless) agents.at(id).homeless = true;
}

AsymmetryReport asymmetry(const std::vector<Agent>& agents, const MarketConfig& config,
                          double shift) {
  if (!(shift > 0.0 && shift < 1.0)) throw ConfigError("asymmetry: shift must lie in (0, 1)");
  const auto demand = demand_curve(agents, config.utility);
  const auto base = equilibrium(demand, config.supply);
  const auto in = equilibrium(demand, config.supply.scaled(1.0 - shift));
  const auto out = equilibrium(demand, config.supply.scaled(1.0 + shift));
  AsymmetryReport r;
  r.shift = shift;
  r.baseline_price = base.price;
  r.baseline_homeless = base.homeless.size();
  auto branch = [&](const Equilibrium& e) {
    return Branch{e.price, e.homeless.size(), e.price - base.price,
                  static_cast<double>(e.homeless.size()) - static_cast<double>(base.homeless.size())};
  };
  r.inward = branch(in);
  r.outward = branch(out);
  if (r.outward.d_homeless != 0.0) {
    r.ratio = r.inward.d_homeless / -r.outward.d_homeless;
  } else {
    r.flags.push_back("outward shift leaves homelessness unchanged; ratio undefined");
  }
  if (base.homeless.empty()) r.flags.push_back("empty homeless set at baseline");
  for (const auto* e : {&base, &in, &out}) {
    if (e->no_trade) r.flags.push_back("no-trade equilibrium in a branch");
    if (e->excess_supply) r.flags.push_back("excess supply in a branch");
  }
  return r;
}

namespace {

PeriodRecord record(int t, const Equilibrium& eq, const std::vector<Agent>& agents) {
  PeriodRecord r;
  r.t = t;
  r.price = eq.price;
  r.quantity = eq.quantity;
  r.homeless_count = eq.homeless.size();
  r.no_trade = eq.no_trade;
  r.excess_supply = eq.excess_supply;
  KahanSum hs;
  KahanSum ds;
  std::size_t hn = 0;
  for (const auto& a : agents) {
    if (a.homeless) {
      hs += a.income;
      ++hn;
    } else {
      ds += a.income;
    }
  }
  if (hn > 0) r.mean_income_homeless = hs.value() / static_cast<double>(hn);
  if (hn < agents.size()) r.mean_income_housed = ds.value() / static_cast<double>(agents.size() - hn);
  return r;
}

}  // namespace

SimulationResult simulate(const MarketConfig& config, const std::map<int, double>& shocks,
                          int periods, double asymmetry_shift) {
  validate(config);
  if (periods < 2) throw ConfigError("simulate: need at least 2 periods");
  Rng rng(config.seed);
  SimulationResult out;
  out.agents = initial_agents(config, rng);
  MarketConfig current = config;
  for (int t = 0; t < periods; ++t) {
    if (auto it = shocks.find(t); it != shocks.end()) current.supply = config.supply.scaled(it->second);
    const auto eq = equilibrium(demand_curve(out.agents, config.utility), current.supply);
    apply_equilibrium(eq, out.agents);
    out.periods.push_back(record(t, eq, out.agents));
    step_dynamics(out.agents, config, rng);
  }
  out.asymmetry = asymmetry(out.agents, current, asymmetry_shift);
  return out;
}

std::vector<SimulationResult> simulate_ensemble(const MarketConfig& config,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::map<int, double>& shocks, int periods,
                                                double asymmetry_shift) {
  std::vector<std::uint64_t> sorted = seeds;
  std::sort(sorted.begin(), sorted.end());
  std::vector<SimulationResult> out(sorted.size());
  std::vector<std::exception_ptr> errors(sorted.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(sorted.size()); ++i) {
    const auto u = static_cast<std::size_t>(i);
    try {
      MarketConfig c = config;
      c.seed = sorted[u];
      out[u] = simulate(c, shocks, periods, asymmetry_shift);
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

BridgeResult bridge(const MarketConfig& config, const BridgeConfig& bc, std::uint64_t seed) {
  validate(config);
  if (bc.markets < 3 || bc.agents == 0 || bc.burn_in < 1) throw ConfigError("bridge: invalid sizes");
  struct Obs {
    double price0 = 0.0, price1 = 0.0;
    std::size_t homeless0 = 0, homeless1 = 0;
  };
  std::vector<Obs> obs(bc.markets);
  std::vector<std::exception_ptr> errors(bc.markets);
  const double scale = static_cast<double>(bc.agents) / static_cast<double>(config.agents);
  const SupplyCurve supply = config.supply.scaled(scale);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t m = 0; m < static_cast<std::ptrdiff_t>(bc.markets); ++m) {
    const auto u = static_cast<std::size_t>(m);
    try {
      Rng rng = market_rng(seed, u);
      std::uniform_real_distribution<double> unit(-1.0, 1.0);
      MarketConfig c = config;
      c.agents = bc.agents;
      c.income_log_mean += bc.income_log_mean_spread * unit(rng);
      const double factor = 1.0 + bc.shock_half_width * unit(rng);
      auto agents = initial_agents(c, rng);
      Equilibrium eq;
      for (int t = 0; t <= bc.burn_in; ++t) {
        eq = equilibrium(demand_curve(agents, c.utility), supply);
        apply_equilibrium(eq, agents);
        if (t == bc.burn_in) break;
        step_dynamics(agents, c, rng);
      }
      obs[u].price0 = eq.price;
      obs[u].homeless0 = eq.homeless.size();
      step_dynamics(agents, c, rng);
      eq = equilibrium(demand_curve(agents, c.utility), supply.scaled(factor));
      obs[u].price1 = eq.price;
      obs[u].homeless1 = eq.homeless.size();
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  const int t0 = bc.burn_in;
  const int t1 = bc.burn_in + 1;
  panel::RawSeries series;
  for (std::size_t m = 0; m < bc.markets; ++m) {
    char id[32];
    std::snprintf(id, sizeof id, "m%05zu", m);
    const double pop = static_cast<double>(bc.agents);
    series.set(id, t0, "population", pop);
    series.set(id, t1, "population", pop);
    series.set(id, t0, "chronic_count", static_cast<double>(obs[m].homeless0));
    series.set(id, t1, "chronic_count", static_cast<double>(obs[m].homeless1));
    series.set(id, t0, "median_rent", obs[m].price0);
    series.set(id, t1, "median_rent", obs[m].price1);
  }
  panel::SpecConfig spec;
  spec.name = "bridge";
  spec.title = "Simulated markets: piecewise long difference";
  spec.outcome = {"chronic_rate", panel::Transform::kLog, false, ""};
  spec.split = {"median_rent", panel::Transform::kLog, false, ""};
  spec.piecewise = true;
  spec.periods = {{t0, t1}};
  const auto p = panel::build_panel(series, spec);

  BridgeResult r;
  r.markets_used = p.rows.size();
  r.markets_dropped = p.drops.size();
  r.report = ols::fit(ols::design_from_panel(p), "bridge");
  r.report.outcome = panel::display_label(spec.outcome);
  r.report.dropped = p.drops.size();
  return r;
}

}  // namespace atlas::market
