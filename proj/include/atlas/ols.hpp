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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "atlas/panel.hpp"

namespace atlas::ols {

/// Regressors with the intercept first (when present), then the piecewise
/// split terms, covariates and period dummies.
struct DesignMatrix {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  std::vector<std::string> clusters;
  std::vector<std::string> names;
  std::vector<std::string> labels;  // display labels, same order as names
};

/// Finite entries, n > k, unique names, consistent sizes. Throws StructuralError.
void validate(const DesignMatrix& design);

/// Coefficients, clustered covariance and fit statistics for one fitted
/// specification.
struct EstimateReport {
  std::string label;
  std::string outcome;
  std::string estimator = "OLS";
  std::vector<std::string> names;
  std::vector<std::string> labels;
  Eigen::VectorXd coef;
  Eigen::MatrixXd vcov;
  Eigen::VectorXd se;
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t clusters = 0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
  double rmse = 0.0;
  double ssr = 0.0;
  double tss = 0.0;
  bool has_intercept = false;
  std::string cluster_by = "GEOID";
  std::size_t dropped = 0;

  std::optional<std::size_t> index_of(const std::string& name) const;
  /// Two-sided p from Student t with (clusters - 1) df.
  double p_value(std::size_t j) const;
};

/// Number of distinct cluster keys.
std::size_t count_clusters(std::span<const std::string> clusters);

/// Sandwich c * B (sum_g s_g s_g') B with s_g = sum_{i in g} scores_i * e_i and
/// c = G/(G-1) * (n-1)/(n-k). `bread` is the inverse of the scores' Gram
/// matrix (X'X)^-1 for OLS, (Xhat'Xhat)^-1 for 2SLS.
Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& scores,
                                    const Eigen::VectorXd& residuals,
                                    std::span<const std::string> clusters);

struct LeastSquares {
  Eigen::VectorXd coef;
  Eigen::MatrixXd gram_inverse;  // (X'X)^-1
};

/// Column-pivoted Householder QR solve. Throws NumericalError naming the
/// collinear columns when rank(X) < k at relative pivot tolerance 1e-10.
LeastSquares solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names, const std::string& label);

/// Least squares through a column-pivoted Householder QR, with the
/// cluster-robust covariance above. Throws NumericalError naming the
/// collinear columns when the design is rank deficient (relative pivot
/// tolerance 1e-10), or when fewer than two clusters are present.
EstimateReport fit(const DesignMatrix& design, std::string label = {});

struct WaldResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::size_t residual_df = 0;  // n - k of the unrestricted fit
};

/// W = (Rb - r)' (R V R')^-1 (Rb - r) against chi-squared(q).
WaldResult wald_test(const EstimateReport& report, const Eigen::MatrixXd& restriction,
                     const Eigen::VectorXd& target);

/// H0: coefficient a equals coefficient b.
WaldResult test_equal(const EstimateReport& report, const std::string& a, const std::string& b);

struct MarginsPoint {
  double grid = 0.0;
  double fit = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Predicted outcome over a grid of split-variable changes with pointwise
/// 95% bands (1.96 normal critical value). Columns not named in `base`
/// are held at zero; the intercept at one.
std::vector<MarginsPoint> margins(const EstimateReport& report, std::span<const double> grid,
                                  const std::map<std::string, double>& base,
                                  const std::string& plus_name, const std::string& minus_name);

/// Column names used for the split variable in designs built from a panel.
struct SplitNames {
  std::string plus;
  std::string minus;
  std::string level;  // single column when the split is not piecewise
};
SplitNames split_names(const panel::SpecConfig& spec);

DesignMatrix design_from_panel(const panel::Panel& panel);

}  // namespace atlas::ols
