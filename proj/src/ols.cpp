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
#include "atlas/ols.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "atlas/error.hpp"
#include "atlas/numeric.hpp"

namespace atlas::ols {

void validate(const DesignMatrix& design) {
  const auto n = static_cast<std::size_t>(design.x.rows());
  const auto k = static_cast<std::size_t>(design.x.cols());
  if (static_cast<std::size_t>(design.y.size()) != n || design.clusters.size() != n) {
    throw StructuralError("design: outcome, regressors and cluster ids differ in length");
  }
  if (design.names.size() != k) throw StructuralError("design: column name count != columns");
  if (!design.labels.empty() && design.labels.size() != k) {
    throw StructuralError("design: label count != columns");
  }
  if (n <= k) {
    throw StructuralError("design: need more rows than columns (n = " + std::to_string(n) +
                          ", k = " + std::to_string(k) + ")");
  }
  std::set<std::string> seen;
  for (const auto& name : design.names) {
    if (!seen.insert(name).second) throw StructuralError("design: duplicate column '" + name + "'");
  }
  if (!design.x.allFinite() || !design.y.allFinite()) {
    throw StructuralError("design: non-finite entries");
  }
}

std::optional<std::size_t> EstimateReport::index_of(const std::string& name) const {
  auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) return std::nullopt;
  return static_cast<std::size_t>(it - names.begin());
}

double EstimateReport::p_value(std::size_t j) const {
  if (!(se(j) > 0.0)) return coef(j) == 0.0 ? 1.0 : 0.0;
  return student_t_two_sided_p(coef(j) / se(j), static_cast<double>(clusters) - 1.0);
}

std::size_t count_clusters(std::span<const std::string> clusters) {
  return std::set<std::string>(clusters.begin(), clusters.end()).size();
}

Eigen::MatrixXd cluster_robust_vcov(const Eigen::MatrixXd& bread, const Eigen::MatrixXd& scores,
                                    const Eigen::VectorXd& residuals,
                                    std::span<const std::string> clusters) {
  const auto n = scores.rows();
  const auto k = scores.cols();
  std::map<std::string, Eigen::VectorXd> sums;
  for (Eigen::Index i = 0; i < n; ++i) {
    auto [it, inserted] = sums.try_emplace(clusters[i], Eigen::VectorXd::Zero(k));
    it->second.noalias() += scores.row(i).transpose() * residuals(i);
  }
  const auto g = static_cast<double>(sums.size());
  if (sums.size() < 2) throw NumericalError("clustered covariance needs at least 2 clusters");
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, s] : sums) meat.selfadjointView<Eigen::Lower>().rankUpdate(s);
  meat = meat.selfadjointView<Eigen::Lower>();
  const double nn = static_cast<double>(n);
  const double c = g / (g - 1.0) * (nn - 1.0) / (nn - static_cast<double>(k));
  Eigen::MatrixXd v = c * bread * meat * bread;
  return 0.5 * (v + v.transpose());
}

LeastSquares solve_least_squares(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                 const std::vector<std::string>& names, const std::string& label) {
  const auto k = x.cols();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) {
    std::vector<std::string> dropped;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = qr.rank(); j < k; ++j) {
      const auto col = static_cast<std::size_t>(perm(j));
      dropped.push_back(col < names.size() ? names[col] : "column " + std::to_string(col));
    }
    std::sort(dropped.begin(), dropped.end());
    std::string list;
    for (const auto& d : dropped) list += (list.empty() ? "" : ", ") + d;
    throw NumericalError("fit '" + label + "': rank-deficient design, collinear column(s): " + list);
  }
  LeastSquares out;
  out.coef = qr.solve(y);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  out.gram_inverse = perm * inner * perm.transpose();
  return out;
}

EstimateReport fit(const DesignMatrix& design, std::string label) {
  validate(design);
  const auto n = design.x.rows();
  const auto k = design.x.cols();
  if (count_clusters(design.clusters) < 2) {
    throw NumericalError("fit '" + label + "': fewer than 2 clusters");
  }

  const auto ls = solve_least_squares(design.x, design.y, design.names, label);

  EstimateReport r;
  r.label = std::move(label);
  r.names = design.names;
  r.labels = design.labels.empty() ? design.names : design.labels;
  r.n = static_cast<std::size_t>(n);
  r.k = static_cast<std::size_t>(k);
  r.has_intercept = !design.names.empty() && design.names.front() == "(Intercept)";
  r.coef = ls.coef;
  const Eigen::MatrixXd& bread = ls.gram_inverse;

  const Eigen::VectorXd e = design.y - design.x * r.coef;
  r.vcov = cluster_robust_vcov(bread, design.x, e, design.clusters);
  r.se = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.clusters = count_clusters(design.clusters);

  r.ssr = e.squaredNorm();
  const double nn = static_cast<double>(n);
  if (r.has_intercept) {
    r.tss = (design.y.array() - design.y.mean()).matrix().squaredNorm();
  } else {
    r.tss = design.y.squaredNorm();
  }
  r.r2 = r.tss > 0.0 ? 1.0 - r.ssr / r.tss : (r.ssr == 0.0 ? 1.0 : 0.0);
  const double dof_num = r.has_intercept ? nn - 1.0 : nn;
  r.adj_r2 = 1.0 - (1.0 - r.r2) * dof_num / (nn - static_cast<double>(k));
  r.rmse = std::sqrt(r.ssr / nn);
  return r;
}

WaldResult wald_test(const EstimateReport& report, const Eigen::MatrixXd& restriction,
                     const Eigen::VectorXd& target) {
  const auto k = report.coef.size();
  const auto q = restriction.rows();
  if (restriction.cols() != k || target.size() != q || q == 0) {
    throw StructuralError("wald_test: restriction dimensions do not conform");
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(restriction);
  if (lu.rank() < q) throw StructuralError("wald_test: restriction matrix lacks full row rank");
  const Eigen::VectorXd d = restriction * report.coef - target;
  const Eigen::MatrixXd middle = restriction * report.vcov * restriction.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(middle);
  const double max_ev = eig.eigenvalues().maxCoeff();
  if (!(max_ev > 0.0) || eig.eigenvalues().minCoeff() <= 1e-12 * max_ev) {
    throw NumericalError("wald_test: R V R' is singular (degenerate restriction)");
  }
  WaldResult w;
  w.statistic = d.dot(middle.ldlt().solve(d));
  w.df = static_cast<int>(q);
  w.p_value = chi_squared_upper_p(w.statistic, static_cast<double>(q));
  w.residual_df = report.n - report.k;
  return w;
}

WaldResult test_equal(const EstimateReport& report, const std::string& a, const std::string& b) {
  const auto ia = report.index_of(a);
  const auto ib = report.index_of(b);
  if (!ia || !ib) {
    throw ConfigError("test_equal: report '" + report.label + "' lacks column '" +
                      (ia ? b : a) + "'");
  }
  Eigen::MatrixXd restriction = Eigen::MatrixXd::Zero(1, report.coef.size());
  restriction(0, static_cast<Eigen::Index>(*ia)) = 1.0;
  restriction(0, static_cast<Eigen::Index>(*ib)) = -1.0;
  return wald_test(report, restriction, Eigen::VectorXd::Zero(1));
}

std::vector<MarginsPoint> margins(const EstimateReport& report, std::span<const double> grid,
                                  const std::map<std::string, double>& base,
                                  const std::string& plus_name, const std::string& minus_name) {
  const auto ip = report.index_of(plus_name);
  const auto im = report.index_of(minus_name);
  if (!ip || !im) throw ConfigError("margins: report lacks split columns");
  const auto k = report.coef.size();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(k);
  if (report.has_intercept) x0(0) = 1.0;
  for (const auto& [name, v] : base) {
    auto j = report.index_of(name);
    if (!j) throw ConfigError("margins: unknown base column '" + name + "'");
    x0(static_cast<Eigen::Index>(*j)) = v;
  }
  std::vector<MarginsPoint> out;
  out.reserve(grid.size());
  for (double g : grid) {
    Eigen::VectorXd x = x0;
    const auto s = panel::piecewise_split(g);
    x(static_cast<Eigen::Index>(*ip)) = s.plus;
    x(static_cast<Eigen::Index>(*im)) = s.minus;
    const double fit = x.dot(report.coef);
    const double se = std::sqrt(std::max(0.0, x.dot(report.vcov * x)));
    out.push_back({g, fit, fit - 1.96 * se, fit + 1.96 * se});
  }
  return out;
}

SplitNames split_names(const panel::SpecConfig& spec) {
  return {spec.split.variable + "_plus", spec.split.variable + "_minus", "d_" + spec.split.variable};
}

DesignMatrix design_from_panel(const panel::Panel& panel) {
  const auto& spec = panel.spec;
  const auto names = split_names(spec);
  DesignMatrix d;
  d.names.push_back("(Intercept)");
  d.labels.push_back("(Intercept)");
  const std::string split_label = panel::display_label(spec.split);
  if (spec.piecewise) {
    d.names.push_back(names.plus);
    d.labels.push_back(split_label + " (+)");
    d.names.push_back(names.minus);
    d.labels.push_back(split_label + " (-)");
  } else {
    d.names.push_back(names.level);
    d.labels.push_back(split_label);
  }
  for (const auto& c : spec.covariates) {
    d.names.push_back("d_" + c.variable);
    d.labels.push_back(panel::display_label(c));
  }
  for (std::size_t p = 1; p < panel.period_labels.size(); ++p) {
    d.names.push_back("period_" + panel.period_labels[p]);
    d.labels.push_back("Period " + panel.period_labels[p]);
  }
  const auto n = static_cast<Eigen::Index>(panel.rows.size());
  const auto k = static_cast<Eigen::Index>(d.names.size());
  d.x.resize(n, k);
  d.y.resize(n);
  d.clusters.reserve(panel.rows.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = panel.rows[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    d.x(i, j++) = 1.0;
    if (spec.piecewise) {
      d.x(i, j++) = r.split_plus;
      d.x(i, j++) = r.split_minus;
    } else {
      d.x(i, j++) = r.split_delta;
    }
    for (double c : r.covariates) d.x(i, j++) = c;
    for (std::size_t p = 1; p < r.period_dummies.size(); ++p) d.x(i, j++) = r.period_dummies[p];
    d.y(i) = r.outcome_delta;
    d.clusters.push_back(r.cluster);
  }
  return d;
}

}  // namespace atlas::ols
