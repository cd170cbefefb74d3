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
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "atlas/ols.hpp"

namespace atlas::market {

/// U(H, x) = (1 + aH) sqrt(x). P(H_min) is set by the market; P(H_next) is
/// the fixed price of the next quality up.
struct UtilityParams {
  double a = 1.0;
  double h_min = 1.0;
  double h_next = 2.0;
  double p_next = 100.0;
};

void validate(const UtilityParams& params);

double utility(double h, double x, double a);

/// Generic utility used by the bisection solvers.
using UtilityFn = std::function<double(double h, double x)>;

/// B^H = Y (1 - 1/(1+aH)^2). Throws DataError for Y <= 0 or H < 0.
double bid_rent_homeless(double income, double h, const UtilityParams& params);

/// Root of U(H, Y - B) = U(0, Y) on [0, Y).
double bid_rent_homeless_bisect(double income, double h, const UtilityFn& u);

/// B1 = Y - (Y - P_next) ((1 + a H_next)/(1 + a H_min))^2. Throws DataError
/// when Y <= P_next and NumericalError when B1 < 0 (no root in [0, Y)).
double bid_rent_marginal(double income, const UtilityParams& params);

/// Root of U(H_min, Y - B) = U(H_next, Y - P_next) on [0, Y).
double bid_rent_marginal_bisect(double income, const UtilityParams& params, const UtilityFn& u);

/// Ybar = P(H_min) / (1 - 1/(1 + a H_min)^2).
double cutoff_income(double p_min, const UtilityParams& params);

/// Solves B^H(H_min, Y) = P(H_min) for Y by bracketing and bisection.
double cutoff_income_bisect(double p_min, const UtilityParams& params, const UtilityFn& u);

struct Agent {
  std::size_t id = 0;
  double income = 0.0;
  bool homeless = false;
};

enum class Margin {
  kHomeless,  // outbid for H_min means homelessness
  kQuality,   // outbid for H_min means moving up to H_next
};

struct Bid {
  double bid = 0.0;
  std::size_t agent_id = 0;
  Margin margin = Margin::kHomeless;
};

struct Demand {
  std::vector<Bid> bids;  // nonincreasing; ties by agent id
  std::vector<std::size_t> non_participants;  // prefer H_next even at a zero H_min price
};

/// Willingness to pay for an H_min unit: min(B^H, B1) where B1 applies
/// when H_next is affordable. Agents with B1 < 0 do not participate.
Bid agent_bid(const Agent& agent, const UtilityParams& params, bool* participates);

Demand demand_curve(const std::vector<Agent>& agents, const UtilityParams& params);

/// Piecewise-linear quantity as a function of price, constant outside the
/// listed points. Quantities are in units of dwellings; the integer supply
/// at price p is floor(S(p)).
class SupplyCurve {
 public:
  SupplyCurve() = default;
  /// (price, quantity) with prices strictly increasing, quantities
  /// nondecreasing and all values finite and >= 0. Throws ConfigError.
  explicit SupplyCurve(std::vector<std::pair<double, double>> points);

  static SupplyCurve vertical(double quantity);

  double quantity(double price) const;
  /// inf { p >= 0 : S(p) >= q }, +inf when never reached.
  double min_price(double q) const;
  /// Quantities multiplied by `factor` (inward shift < 1 < outward shift).
  SupplyCurve scaled(double factor) const;

  const std::vector<std::pair<double, double>>& points() const { return points_; }

 private:
  std::vector<std::pair<double, double>> points_;
};

struct Equilibrium {
  double price = 0.0;
  std::size_t quantity = 0;
  std::vector<std::size_t> homeless;  // sorted agent ids
  std::vector<std::size_t> upgraded;  // quality-margin agents priced out
  bool no_trade = false;
  bool excess_supply = false;
};

/// q* = max { q : b_q >= Pmin(q) }, price = clamp(Pmin(q* + 1), b_{q*+1}, b_{q*}),
/// i.e. the top of the price interval on which supply and the demand step
/// overlap. The first q* bids (by rank) are housed.
Equilibrium equilibrium(const Demand& demand, const SupplyCurve& supply);

struct MarketConfig {
  UtilityParams utility;
  std::size_t agents = 10000;
  double income_log_mean = 3.7;
  double income_log_sd = 0.5;
  SupplyCurve supply;
  double delta = -5.0;
  double epsilon_half_width = 2.0;  // epsilon ~ U(-w, w)
  double income_floor = 1e-6;
  std::uint64_t seed = 1;
};

void validate(const MarketConfig& config);

/// Default asymmetric configuration used by the CLI and the bridge.
MarketConfig default_config();

using Rng = std::mt19937_64;

std::vector<Agent> initial_agents(const MarketConfig& config, Rng& rng);

/// Y' = max(Y + delta 1(homeless) + epsilon, floor). One epsilon draw per
/// agent in id order. Homeless flags are cleared for the next period.
void step_dynamics(std::vector<Agent>& agents, const MarketConfig& config, Rng& rng);

/// Sets each agent's homeless flag from an equilibrium.
void apply_equilibrium(const Equilibrium& eq, std::vector<Agent>& agents);

struct PeriodRecord {
  int t = 0;
  double price = 0.0;
  std::size_t quantity = 0;
  std::size_t homeless_count = 0;
  std::optional<double> mean_income_homeless;
  std::optional<double> mean_income_housed;
  bool no_trade = false;
  bool excess_supply = false;
};

struct Branch {
  double price = 0.0;
  std::size_t homeless = 0;
  double d_price = 0.0;
  double d_homeless = 0.0;
};

struct AsymmetryReport {
  double shift = 0.0;
  double baseline_price = 0.0;
  std::size_t baseline_homeless = 0;
  Branch inward;
  Branch outward;
  std::optional<double> ratio;  // inward increase / outward decrease
  std::vector<std::string> flags;
};

/// Both branches start from the same agents: supply scaled by (1 - shift)
/// and (1 + shift) against the unshifted baseline.
AsymmetryReport asymmetry(const std::vector<Agent>& agents, const MarketConfig& config,
                          double shift);

struct SimulationResult {
  std::vector<PeriodRecord> periods;
  std::vector<Agent> agents;  // incomes entering period T
  AsymmetryReport asymmetry;
};

/// T periods of demand -> equilibrium -> dynamics. `shocks` maps a period to
/// the supply scale in force from that period on.
SimulationResult simulate(const MarketConfig& config, const std::map<int, double>& shocks, int periods,
                          double asymmetry_shift = 0.1);

/// Independent seeded markets run in parallel, returned in seed order.
std::vector<SimulationResult> simulate_ensemble(const MarketConfig& config,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::map<int, double>& shocks, int periods,
                                                double asymmetry_shift = 0.1);

struct BridgeConfig {
  std::size_t markets = 120;
  std::size_t agents = 600;
  int burn_in = 6;
  double shock_half_width = 0.2;  // supply scale ~ U(1 - w, 1 + w)
  double income_log_mean_spread = 0.15;
};

struct BridgeResult {
  ols::EstimateReport report;
  std::size_t markets_used = 0;
  std::size_t markets_dropped = 0;
};

/// Simulates many markets, records (homeless rate, price) before and after a
/// random permanent supply shock, and fits the piecewise long-difference
/// regression of the log homeless rate on the log price.
BridgeResult bridge(const MarketConfig& config, const BridgeConfig& bridge, std::uint64_t seed);

}  // namespace atlas::market
