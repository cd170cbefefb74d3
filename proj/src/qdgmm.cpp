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
#include "atlas/qdgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "atlas/numeric.hpp"

namespace atlas::qdgmm {
namespace {

constexpr std::size_t kBlock = 512;

double index_of(const Eigen::VectorXd& beta, const QDPair& p) { return p.dx.dot(beta); }

void check_beta(const Eigen::VectorXd& beta, const QDData& data) {
  if (static_cast<std::size_t>(beta.size()) != data.dim()) {
    throw StructuralError("qdgmm: beta has " + std::to_string(beta.size()) + " entries, data has " +
                          std::to_string(data.dim()) + " columns");
  }
  if (data.pairs.empty()) throw StructuralError("qdgmm: empty data");
}

// Fixed block partition; each block is summed serially and the partials are
// combined in block order.
template <typename Acc, typename Init, typename Body>
Acc blocked_sum(std::size_t n, Init init, Body body) {
  const std::size_t blocks = (n + kBlock - 1) / kBlock;
  std::vector<Acc> partial(blocks, init());
  std::vector<std::exception_ptr> errors(blocks);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(blocks); ++b) {
    try {
      const std::size_t lo = static_cast<std::size_t>(b) * kBlock;
      const std::size_t hi = std::min(n, lo + kBlock);
      for (std::size_t i = lo; i < hi; ++i) body(i, partial[static_cast<std::size_t>(b)]);
    } catch (...) {
      errors[static_cast<std::size_t>(b)] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  Acc total = init();
  for (auto& p : partial) total += p;
  return total;
}

double inf_norm(const Eigen::VectorXd& v) { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

void validate(const QDData& data) {
  const auto k = data.dim();
  if (!data.labels.empty() && data.labels.size() != k) {
    throw StructuralError("qdgmm: label count != column count");
  }
  for (const auto& p : data.pairs) {
    const std::string where = " (" + p.msa_id + ", " + p.period + ")";
    if (static_cast<std::size_t>(p.dx.size()) != k) {
      throw StructuralError("qdgmm: regressor length mismatch" + where);
    }
    if (!std::isfinite(p.y_t) || !std::isfinite(p.y_prev) || p.y_t < 0.0 || p.y_prev < 0.0) {
      throw StructuralError("qdgmm: outcome levels must be finite and >= 0" + where);
    }
    if (!p.dx.allFinite()) throw StructuralError("qdgmm: non-finite regressor" + where);
  }
}

double qd_residual(const Eigen::VectorXd& beta, const QDPair& pair) {
  const double eta = index_of(beta, pair);
  if (!(std::abs(eta) <= kOverflowGuard)) {
    throw NumericalError("qd_residual: |dx'beta| = " + format_double(std::abs(eta)) +
                         " exceeds the overflow guard for " + pair.msa_id + " " + pair.period);
  }
  return pair.y_t - std::exp(eta) * pair.y_prev;
}

double max_abs_index(const Eigen::VectorXd& beta, const QDData& data) {
  double m = 0.0;
  for (const auto& p : data.pairs) m = std::max(m, std::abs(index_of(beta, p)));
  return m;
}

Eigen::VectorXd sample_moments(const Eigen::VectorXd& beta, const QDData& data) {
  check_beta(beta, data);
  const auto k = static_cast<Eigen::Index>(data.dim());
  Eigen::VectorXd sum = blocked_sum<Eigen::VectorXd>(
      data.size(), [k] { return Eigen::VectorXd::Zero(k).eval(); },
      [&](std::size_t i, Eigen::VectorXd& acc) {
        const auto& p = data.pairs[i];
        acc.noalias() += p.dx * qd_residual(beta, p);
      });
  return sum / static_cast<double>(data.size());
}

Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& beta, const QDData& data) {
  check_beta(beta, data);
  const auto k = static_cast<Eigen::Index>(data.dim());
  Eigen::MatrixXd sum = blocked_sum<Eigen::MatrixXd>(
      data.size(), [k] { return Eigen::MatrixXd::Zero(k, k).eval(); },
      [&](std::size_t i, Eigen::MatrixXd& acc) {
        const auto& p = data.pairs[i];
        qd_residual(beta, p);  // overflow guard
        const double w = p.y_prev * std::exp(index_of(beta, p));
        acc.noalias() += w * p.dx * p.dx.transpose();
      });
  return -sum / static_cast<double>(data.size());
}

namespace reference {

Eigen::VectorXd sample_moments(const Eigen::VectorXd& beta, const QDData& data) {
  check_beta(beta, data);
  const auto k = data.dim();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    double s = 0.0;
    for (const auto& p : data.pairs) s += p.dx(j) * qd_residual(beta, p);
    m(j) = s / static_cast<double>(data.size());
  }
  return m;
}

Eigen::MatrixXd moment_jacobian(const Eigen::VectorXd& beta, const QDData& data) {
  check_beta(beta, data);
  const auto k = static_cast<Eigen::Index>(data.dim());
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) {
      double s = 0.0;
      for (const auto& p : data.pairs) {
        qd_residual(beta, p);
        s += p.dx(a) * p.y_prev * std::exp(p.dx.dot(beta)) * p.dx(b);
      }
      jac(a, b) = -s / static_cast<double>(data.size());
    }
  }
  return jac;
}

}  // namespace reference

Eigen::VectorXd ols_warm_start(const QDData& data) {
  const auto k = static_cast<Eigen::Index>(data.dim());
  std::vector<const QDPair*> rows;
  for (const auto& p : data.pairs) {
    if (p.y_t > 0.0 && p.y_prev > 0.0) rows.push_back(&p);
  }
  if (static_cast<Eigen::Index>(rows.size()) <= k) return Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), k);
  Eigen::VectorXd y(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    x.row(i) = rows[static_cast<std::size_t>(i)]->dx.transpose();
    y(i) = std::log(rows[static_cast<std::size_t>(i)]->y_t / rows[static_cast<std::size_t>(i)]->y_prev);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < k) return Eigen::VectorXd::Zero(k);
  Eigen::VectorXd b = qr.solve(y);
  // Keep the start inside the guard; otherwise fall back to zeros.
  if (!b.allFinite() || max_abs_index(b, data) > kOverflowGuard) return Eigen::VectorXd::Zero(k);
  return b;
}

Eigen::MatrixXd clustered_covariance(const Eigen::VectorXd& beta, const QDData& data) {
  const auto k = static_cast<Eigen::Index>(data.dim());
  const double n = static_cast<double>(data.size());
  std::map<std::string, Eigen::VectorXd> sums;
  for (const auto& p : data.pairs) {
    auto [it, _] = sums.try_emplace(p.msa_id, Eigen::VectorXd::Zero(k));
    it->second.noalias() += p.dx * qd_residual(beta, p);
  }
  if (sums.size() < 2) throw NumericalError("qdgmm: clustered covariance needs at least 2 clusters");
  const double g = static_cast<double>(sums.size());
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
  for (const auto& [_, v] : sums) s.noalias() += v * v.transpose();
  s *= g / (g - 1.0) / n;
  const Eigen::MatrixXd jac = moment_jacobian(beta, data);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
  if (!lu.isInvertible()) throw NumericalError("qdgmm: singular Jacobian at the estimate");
  const Eigen::MatrixXd j_inv = lu.inverse();
  Eigen::MatrixXd v = j_inv * s * j_inv.transpose() / n;
  return 0.5 * (v + v.transpose());
}

QDEstimate fit_qd(const QDData& data, const Options& options, std::string label) {
  validate(data);
  if (data.pairs.empty()) throw StructuralError("fit_qd: empty data");
  const auto k = static_cast<Eigen::Index>(data.dim());

  QDEstimate est;
  Eigen::VectorXd beta;
  if (options.start) {
    beta = *options.start;
    est.init = "user";
  } else if (options.init == Init::kOlsWarmStart) {
    beta = ols_warm_start(data);
    est.init = "ols";
  } else {
    beta = Eigen::VectorXd::Zero(k);
    est.init = "zero";
  }
  if (beta.size() != k || !beta.allFinite()) throw ConfigError("fit_qd: invalid starting values");
  if (max_abs_index(beta, data) > kOverflowGuard) {
    throw NumericalError("fit_qd: starting values violate the overflow guard");
  }

  Eigen::VectorXd m = sample_moments(beta, data);
  double norm = inf_norm(m);
  est.trajectory.push_back({0, norm, 0.0});
  bool converged = norm < options.moment_tolerance;
  int it = 0;
  while (!converged) {
    if (it >= options.max_iterations) {
      throw ConvergenceError("fit_qd '" + label + "': no convergence after " +
                                 std::to_string(options.max_iterations) + " iterations (||m|| = " +
                                 format_double(norm) + ")",
                             est.trajectory);
    }
    ++it;
    const Eigen::MatrixXd jac = moment_jacobian(beta, data);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw NumericalError("fit_qd '" + label + "': singular Jacobian at iteration " +
                           std::to_string(it));
    }
    const Eigen::VectorXd step = -lu.solve(m);
    double lambda = 1.0;
    Eigen::VectorXd trial;
    Eigen::VectorXd m_trial;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, lambda *= 0.5) {
      trial = beta + lambda * step;
      if (max_abs_index(trial, data) > kOverflowGuard) continue;
      m_trial = sample_moments(trial, data);
      if (m_trial.norm() < m.norm() || inf_norm(lambda * step) < options.step_tolerance) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw ConvergenceError("fit_qd '" + label + "': line search failed at iteration " +
                                 std::to_string(it),
                             est.trajectory);
    }
    const double step_norm = inf_norm(trial - beta);
    beta = trial;
    m = m_trial;
    norm = inf_norm(m);
    est.trajectory.push_back({it, norm, step_norm});
    converged = norm < options.moment_tolerance || step_norm < options.step_tolerance;
  }

  est.iterations = it;
  est.moment_norm = norm;
  est.outcome_scale = data.outcome_scale;
  auto& r = est.report;
  r.label = std::move(label);
  r.outcome = data.outcome;
  r.estimator = "QD-GMM";
  r.names = data.names;
  r.labels = data.labels.empty() ? data.names : data.labels;
  r.coef = beta;
  r.vcov = clustered_covariance(beta, data);
  r.se = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.n = data.size();
  r.k = data.dim();
  std::vector<std::string> ids;
  ids.reserve(data.size());
  for (const auto& p : data.pairs) ids.push_back(p.msa_id);
  r.clusters = ols::count_clusters(ids);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.r2 = r.adj_r2 = nan;
  double ssr = 0.0;
  for (const auto& p : data.pairs) ssr += std::pow(qd_residual(beta, p), 2);
  r.ssr = ssr;
  r.rmse = std::sqrt(ssr / static_cast<double>(data.size()));
  r.tss = nan;
  return est;
}

QDData qd_data_from_panel(const panel::Panel& panel) {
  const auto& spec = panel.spec;
  QDData d;
  d.outcome = panel::display_label(spec.outcome);
  d.outcome_scale = spec.outcome_scale;
  const auto names = ols::split_names(spec);
  const std::string split_label = panel::display_label(spec.split);
  if (spec.piecewise) {
    d.names = {names.plus, names.minus};
    d.labels = {split_label + " (+)", split_label + " (-)"};
  } else {
    d.names = {names.level};
    d.labels = {split_label};
  }
  for (const auto& c : spec.covariates) {
    d.names.push_back("d_" + c.variable);
    d.labels.push_back(panel::display_label(c));
  }
  for (const auto& label : panel.period_labels) {
    d.names.push_back("period_" + label);
    d.labels.push_back("Period " + label);
  }
  const auto k = static_cast<Eigen::Index>(d.names.size());
  d.pairs.reserve(panel.rows.size());
  for (const auto& row : panel.rows) {
    QDPair p;
    p.msa_id = row.cluster;
    p.period = row.period;
    p.y_t = row.outcome_t1;
    p.y_prev = row.outcome_t0;
    p.dx.resize(k);
    Eigen::Index j = 0;
    if (spec.piecewise) {
      p.dx(j++) = row.split_plus;
      p.dx(j++) = row.split_minus;
    } else {
      p.dx(j++) = row.split_delta;
    }
    for (double c : row.covariates) p.dx(j++) = c;
    for (double dmy : row.period_dummies) p.dx(j++) = dmy;
    d.pairs.push_back(std::move(p));
  }
  return d;
}

}  // namespace atlas::qdgmm
