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
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atlas/error.hpp"
#include "atlas/ols.hpp"
#include "atlas/panel.hpp"

namespace atlas::qdgmm {

/// Largest |dx'beta| accepted before exp() is evaluated.
inline constexpr double kOverflowGuard = 50.0;

struct QDPair {
  std::string msa_id;
  std::string period;
  double y_t = 0.0;
  double y_prev = 0.0;
  Eigen::VectorXd dx;
};

struct QDData {
  std::vector<QDPair> pairs;
  std::vector<std::string> names;
  std::vector<std::string> labels;
  std::string outcome;
  double outcome_scale = 1.0;

  std::size_t size() const { return pairs.size(); }
  std::size_t dim() const { return names.size(); }
};

/// Finite, nonnegative levels; every dx has dim() entries. Throws StructuralError.
void validate(const QDData& data);

/// u = y_t - exp(dx'beta) * y_prev. Throws NumericalError when |dx'beta| > 50.
double qd_residual(const Eigen::VectorXd& beta, const QDPair& pair);

/// max_i |dx_i'beta|
double max_abs_index(const Eigen::VectorXd& beta, const QDData& data);

/// m(beta) = (1/n) sum_i dx_i u_i. Blocked parallel reduction, summed in
/// block order so the result does not depend on the thread count.
Eigen::VectorXd sample_moments(const Eigen::VectorXd& beta, const QDData& data);

/// J(beta) = -(1/n) sum_i dx_i y_prev,i exp(dx_i'beta) dx_i'
Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& beta, const QDData& data);

namespace reference {
Eigen::VectorXd sample_moments(const Eigen::VectorXd& beta, const QDData& data);
Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& beta, const QDData& data);
}  // namespace reference

enum class Init { kZero, kOlsWarmStart };

struct Options {
  Init init = Init::kZero;
  std::optional<Eigen::VectorXd> start;  // overrides `init` when set
  int max_iterations = 200;
  double moment_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  int max_halvings = 40;
};

struct QDEstimate {
  ols::EstimateReport report;  // coef, clustered vcov, se, n, clusters
  int iterations = 0;
  double moment_norm = 0.0;
  std::vector<IterationRecord> trajectory;
  std::string init;
  double outcome_scale = 1.0;
};

/// Log-linear OLS of ln(y_t / y_prev) on dx over pairs with both levels
/// positive; zeros when that subsample cannot identify beta.
Eigen::VectorXd ols_warm_start(const QDData& data);

/// Damped Newton on m(beta) = 0 with step halving on ||m||. Throws
/// ConvergenceError (with the trajectory) after max_iterations, and
/// NumericalError on a singular Jacobian.
QDEstimate fit_qd(const QDData& data, const Options& options = {}, std::string label = {});

/// (1/n) J^-1 S J^-T with S = G/(G-1) (1/n) sum_g s_g s_g'.
Eigen::MatrixXd clustered_covariance(const Eigen::VectorXd& beta, const QDData& data);

/// Levels of the outcome (after outcome_scale), piecewise split columns,
/// covariate differences and a dummy for every period (no intercept: a
/// constant multiplies both levels and cancels).
QDData qd_data_from_panel(const panel::Panel& panel);

}  // namespace atlas::qdgmm
