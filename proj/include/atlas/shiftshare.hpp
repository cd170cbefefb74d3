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

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "atlas/ols.hpp"
#include "atlas/panel.hpp"

namespace atlas::shiftshare {

/// industry -> share (or growth) for one MSA-year.
using IndustryVector = std::map<std::string, double>;

/// msa id -> year -> industry -> employment share.
struct IndustryShares {
  std::map<std::string, std::map<int, IndustryVector>> values;
  std::vector<std::string> warnings;  // renormalization notices
};

/// year (period start) -> industry -> ln E_k(t1) - ln E_k(t0).
using NationalGrowth = std::map<int, IndustryVector>;

struct Eta {
  double wri = 0.0;
  double elasticity = 1.0;
  double undevelopable = 0.0;
};
using SupplyConstraints = std::map<std::string, Eta>;

/// msa_id,year,naics2,share. Shares must be >= 0; per MSA-year sums outside
/// 1 +/- 1e-6 are rescaled and a warning is recorded.
IndustryShares read_shares_csv(const std::filesystem::path& path);
IndustryShares parse_shares_csv(const std::string& text, const std::string& source);

/// naics2,year,log_growth
NationalGrowth read_growth_csv(const std::filesystem::path& path);
NationalGrowth parse_growth_csv(const std::string& text, const std::string& source);

/// msa_id,wri,elasticity,undevelopable_share. A year column is rejected:
/// the constraints must be time-invariant.
SupplyConstraints read_eta_csv(const std::filesystem::path& path);
SupplyConstraints parse_eta_csv(const std::string& text, const std::string& source);

void validate(const Eta& eta, const std::string& msa_id);

/// sum_k (L_k / sum L) * g_k. Throws DataError listing industries without a
/// growth entry, and for all-zero shares.
double bartik(const IndustryVector& shares, const IndustryVector& growth);

inline constexpr std::size_t kInstrumentCount = 4;

struct InstrumentRow {
  std::string msa_id;
  std::string period;
  double bartik = 0.0;
  std::array<double, kInstrumentCount> values{};  // b, b*WRI, b*elasticity, b*undevelopable
};

struct InstrumentSet {
  std::vector<InstrumentRow> rows;
  panel::DropLog drops;
  static std::array<std::string, kInstrumentCount> names();
};

/// (b, b*wri, b*elasticity, b*undevelopable)
std::array<double, kInstrumentCount> interact(double bartik, const Eta& eta);

/// Bartik per MSA x period from shares at t0 and national growth keyed by
/// t0, interacted with eta. MSA-periods lacking shares, growth or eta are
/// logged and dropped.
InstrumentSet build_instruments(const IndustryShares& shares, const NationalGrowth& growth,
                                const SupplyConstraints& eta,
                                const std::vector<std::pair<int, int>>& periods);

/// Regressors (intercept first), the indices of the endogenous columns and
/// the excluded instruments, all on one row sample.
struct IvSystem {
  ols::DesignMatrix design;
  std::vector<std::size_t> endogenous;
  Eigen::MatrixXd instruments;
  std::vector<std::string> instrument_names;
  panel::DropLog drops;
};

void validate(const IvSystem& system);

struct FirstStage {
  std::string endogenous;
  ols::EstimateReport report;
  double partial_f = 0.0;  // Wald on excluded instruments / q
  int df = 0;
  double p_value = 0.0;
  bool perfect_fit = false;  // zero residual variance: F reported as +inf
};

struct HansenJ {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool testable = false;
};

struct IvResult {
  std::string label;
  ols::EstimateReport report;
  std::vector<FirstStage> first_stages;
  HansenJ hansen;
  std::vector<std::string> instruments_used;
};

FirstStage first_stage(const IvSystem& system, std::size_t endogenous_position);

/// 2SLS with the clustered sandwich built on the projected regressors and
/// residuals from the original regressors.
ols::EstimateReport fit_2sls(const IvSystem& system, std::string label = {});

/// Two-step efficient GMM J statistic, with the weight matrix from the
/// clustered covariance of 2SLS moments. Just-identified systems return
/// J = 0, df = 0, testable = false.
HansenJ hansen_j(const IvSystem& system, const Eigen::VectorXd& beta_2sls);

/// Full fit: first stages, 2SLS, Hansen J.
IvResult fit_iv(const IvSystem& system, std::string label = {});

/// Drops excluded instrument `index`.
IvSystem drop_instrument(const IvSystem& system, std::size_t index);

/// The full fit plus one refit per dropped instrument; fits run in parallel.
std::vector<IvResult> fit_with_leave_one_out(const IvSystem& system, const std::string& label);

enum class EmploymentMode {
  kEndogenous,          // rent_plus, rent_minus and the employment change instrumented
  kPredictedExogenous,  // Bartik enters as an exogenous control
};

/// Builds the system from a piecewise panel whose first auxiliary variable
/// is the employment change. Rows without instruments are dropped and logged.
IvSystem iv_system_from_panel(const panel::Panel& panel, const InstrumentSet& instruments,
                              EmploymentMode mode);

}  // namespace atlas::shiftshare
