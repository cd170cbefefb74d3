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
#include "atlas/shiftshare.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <set>

#include "atlas/csv.hpp"
#include "atlas/error.hpp"
#include "atlas/numeric.hpp"

namespace atlas::shiftshare {
namespace {

IndustryShares shares_from_table(const csv::Table& t) {
  t.require_columns({"msa_id", "year", "naics2", "share"});
  const auto c_msa = t.column("msa_id");
  const auto c_year = t.column("year");
  const auto c_naics = t.column("naics2");
  const auto c_share = t.column("share");
  IndustryShares out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double share = t.number(r, c_share);
    const auto& msa = t.cell(r, c_msa);
    if (!std::isfinite(share) || share < 0.0) {
      throw DataError(t.source() + ": negative or non-finite share for " + msa + " row " +
                      std::to_string(r + 2));
    }
    auto& row = out.values[msa][static_cast<int>(t.integer(r, c_year))];
    if (!row.emplace(t.cell(r, c_naics), share).second) {
      throw StructuralError(t.source() + ": duplicate industry " + t.cell(r, c_naics) + " for " +
                            msa + " row " + std::to_string(r + 2));
    }
  }
  for (auto& [msa, years] : out.values) {
    for (auto& [year, row] : years) {
      KahanSum sum;
      for (const auto& [_, s] : row) sum += s;
      const double total = sum.value();
      if (total > 0.0 && std::abs(total - 1.0) > 1e-6) {
        for (auto& [_, s] : row) s /= total;
        out.warnings.push_back("shares for " + msa + " " + std::to_string(year) + " sum to " +
                               format_double(total) + "; renormalized");
      }
    }
  }
  return out;
}

NationalGrowth growth_from_table(const csv::Table& t) {
  t.require_columns({"naics2", "year", "log_growth"});
  const auto c_naics = t.column("naics2");
  const auto c_year = t.column("year");
  const auto c_g = t.column("log_growth");
  NationalGrowth out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    const double g = t.number(r, c_g);
    if (!std::isfinite(g)) {
      throw DataError(t.source() + ": non-finite growth at row " + std::to_string(r + 2));
    }
    if (!out[static_cast<int>(t.integer(r, c_year))].emplace(t.cell(r, c_naics), g).second) {
      throw StructuralError(t.source() + ": duplicate industry-year at row " +
                            std::to_string(r + 2));
    }
  }
  return out;
}

SupplyConstraints eta_from_table(const csv::Table& t) {
  if (t.has_column("year")) {
    throw ConfigError(t.source() +
                      ": supply constraints must be time-invariant (found a year column)");
  }
  t.require_columns({"msa_id", "wri", "elasticity", "undevelopable_share"});
  const auto c_msa = t.column("msa_id");
  const auto c_wri = t.column("wri");
  const auto c_el = t.column("elasticity");
  const auto c_un = t.column("undevelopable_share");
  SupplyConstraints out;
  for (std::size_t r = 0; r < t.size(); ++r) {
    Eta e{t.number(r, c_wri), t.number(r, c_el), t.number(r, c_un)};
    validate(e, t.cell(r, c_msa));
    if (!out.emplace(t.cell(r, c_msa), e).second) {
      throw StructuralError(t.source() + ": duplicate msa " + t.cell(r, c_msa));
    }
  }
  return out;
}

std::vector<std::size_t> exogenous_columns(const IvSystem& s) {
  std::vector<std::size_t> out;
  const std::set<std::size_t> endo(s.endogenous.begin(), s.endogenous.end());
  for (std::size_t j = 0; j < static_cast<std::size_t>(s.design.x.cols()); ++j) {
    if (!endo.count(j)) out.push_back(j);
  }
  return out;
}

// [exogenous regressors, excluded instruments]
Eigen::MatrixXd instrument_matrix(const IvSystem& s, std::vector<std::string>* names) {
  const auto exo = exogenous_columns(s);
  Eigen::MatrixXd z(s.design.x.rows(),
                    static_cast<Eigen::Index>(exo.size()) + s.instruments.cols());
  Eigen::Index j = 0;
  for (auto c : exo) {
    z.col(j++) = s.design.x.col(static_cast<Eigen::Index>(c));
    if (names) names->push_back(s.design.names[c]);
  }
  for (Eigen::Index c = 0; c < s.instruments.cols(); ++c) {
    z.col(j++) = s.instruments.col(c);
    if (names) names->push_back(s.instrument_names[static_cast<std::size_t>(c)]);
  }
  return z;
}

// Least-squares projection of the endogenous columns on Z; exogenous
// columns are carried over unchanged.
Eigen::MatrixXd projected_regressors(const IvSystem& s, const Eigen::MatrixXd& z,
                                     const std::vector<std::string>& z_names,
                                     const std::string& label) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(1e-10);
  if (qr.rank() < z.cols()) {
    // Reuse the error text naming the collinear instrument columns.
    ols::solve_least_squares(z, Eigen::VectorXd::Zero(z.rows()), z_names, label + " instruments");
  }
  Eigen::MatrixXd xhat = s.design.x;
  for (auto c : s.endogenous) {
    const auto col = static_cast<Eigen::Index>(c);
    xhat.col(col) = z * qr.solve(s.design.x.col(col));
  }
  return xhat;
}

}  // namespace

IndustryShares parse_shares_csv(const std::string& text, const std::string& source) {
  return shares_from_table(csv::parse(text, source));
}
IndustryShares read_shares_csv(const std::filesystem::path& path) {
  return shares_from_table(csv::read_file(path));
}
NationalGrowth parse_growth_csv(const std::string& text, const std::string& source) {
  return growth_from_table(csv::parse(text, source));
}
NationalGrowth read_growth_csv(const std::filesystem::path& path) {
  return growth_from_table(csv::read_file(path));
}
SupplyConstraints parse_eta_csv(const std::string& text, const std::string& source) {
  return eta_from_table(csv::parse(text, source));
}
SupplyConstraints read_eta_csv(const std::filesystem::path& path) {
  return eta_from_table(csv::read_file(path));
}

void validate(const Eta& eta, const std::string& msa_id) {
  if (!std::isfinite(eta.wri)) throw DataError("eta for " + msa_id + ": WRI not finite");
  if (!(eta.elasticity > 0.0) || !std::isfinite(eta.elasticity)) {
    throw DataError("eta for " + msa_id + ": elasticity must be positive");
  }
  if (!(eta.undevelopable >= 0.0 && eta.undevelopable <= 1.0)) {
    throw DataError("eta for " + msa_id + ": undevelopable share outside [0, 1]");
  }
}

double bartik(const IndustryVector& shares, const IndustryVector& growth) {
  std::vector<std::string> missing;
  KahanSum total;
  for (const auto& [k, s] : shares) {
    if (!growth.count(k)) missing.push_back(k);
    total += s;
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    throw DataError("bartik: no national growth for industries: " + list);
  }
  if (!(total.value() > 0.0)) throw DataError("bartik: all industry shares are zero");
  KahanSum b;
  for (const auto& [k, s] : shares) b += s / total.value() * growth.at(k);
  return b.value();
}

std::array<std::string, kInstrumentCount> InstrumentSet::names() {
  return {"bartik", "bartik_x_wri", "bartik_x_elasticity", "bartik_x_undevelopable"};
}

std::array<double, kInstrumentCount> interact(double b, const Eta& eta) {
  return {b, b * eta.wri, b * eta.elasticity, b * eta.undevelopable};
}

InstrumentSet build_instruments(const IndustryShares& shares, const NationalGrowth& growth,
                                const SupplyConstraints& eta,
                                const std::vector<std::pair<int, int>>& periods) {
  InstrumentSet out;
  for (const auto& [msa, years] : shares.values) {
    for (const auto& [t0, t1] : periods) {
      const auto label = panel::period_label(t0, t1);
      auto e = eta.find(msa);
      if (e == eta.end()) {
        out.drops.push_back({msa, label, "missing supply constraints"});
        continue;
      }
      auto s = years.find(t0);
      if (s == years.end()) {
        out.drops.push_back({msa, label, "missing industry shares (" + std::to_string(t0) + ")"});
        continue;
      }
      auto g = growth.find(t0);
      if (g == growth.end()) {
        out.drops.push_back({msa, label, "missing national growth (" + std::to_string(t0) + ")"});
        continue;
      }
      InstrumentRow row;
      row.msa_id = msa;
      row.period = label;
      row.bartik = bartik(s->second, g->second);
      row.values = interact(row.bartik, e->second);
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

void validate(const IvSystem& s) {
  ols::validate(s.design);
  if (s.instruments.rows() != s.design.x.rows()) {
    throw StructuralError("iv: instrument rows differ from design rows");
  }
  if (static_cast<std::size_t>(s.instruments.cols()) != s.instrument_names.size()) {
    throw StructuralError("iv: instrument name count != instrument columns");
  }
  if (!s.instruments.allFinite()) throw StructuralError("iv: non-finite instruments");
  std::set<std::size_t> seen;
  for (auto c : s.endogenous) {
    if (c >= static_cast<std::size_t>(s.design.x.cols()) || !seen.insert(c).second) {
      throw StructuralError("iv: invalid endogenous column index");
    }
  }
  if (s.endogenous.size() > static_cast<std::size_t>(s.instruments.cols())) {
    throw NumericalError("iv: under-identified (" + std::to_string(s.endogenous.size()) +
                         " endogenous, " + std::to_string(s.instruments.cols()) + " instruments)");
  }
}

FirstStage first_stage(const IvSystem& s, std::size_t position) {
  if (position >= s.endogenous.size()) throw StructuralError("first_stage: bad endogenous index");
  const auto col = static_cast<Eigen::Index>(s.endogenous[position]);
  ols::DesignMatrix d;
  d.x = instrument_matrix(s, &d.names);
  d.labels = d.names;
  d.y = s.design.x.col(col);
  d.clusters = s.design.clusters;
  FirstStage fs;
  fs.endogenous = s.design.names[static_cast<std::size_t>(col)];
  fs.report = ols::fit(d, "first stage: " + fs.endogenous);
  fs.report.outcome = fs.endogenous;
  fs.df = static_cast<int>(s.instruments.cols());
  const double scale = std::max(d.y.squaredNorm(), std::numeric_limits<double>::min());
  if (fs.report.ssr <= 1e-24 * scale) {
    fs.perfect_fit = true;
    fs.partial_f = std::numeric_limits<double>::infinity();
    fs.p_value = 0.0;
    return fs;
  }
  const auto q = s.instruments.cols();
  const auto k = static_cast<Eigen::Index>(d.names.size());
  Eigen::MatrixXd restriction = Eigen::MatrixXd::Zero(q, k);
  for (Eigen::Index j = 0; j < q; ++j) restriction(j, k - q + j) = 1.0;
  const auto w = ols::wald_test(fs.report, restriction, Eigen::VectorXd::Zero(q));
  fs.partial_f = w.statistic / static_cast<double>(q);
  fs.p_value = w.p_value;
  return fs;
}

ols::EstimateReport fit_2sls(const IvSystem& s, std::string label) {
  validate(s);
  if (ols::count_clusters(s.design.clusters) < 2) {
    throw NumericalError("fit_2sls '" + label + "': fewer than 2 clusters");
  }
  std::vector<std::string> z_names;
  const Eigen::MatrixXd z = instrument_matrix(s, &z_names);
  const Eigen::MatrixXd xhat = projected_regressors(s, z, z_names, label);
  const auto ls = ols::solve_least_squares(xhat, s.design.y, s.design.names, label);

  ols::EstimateReport r;
  r.label = std::move(label);
  r.estimator = "2SLS";
  r.names = s.design.names;
  r.labels = s.design.labels.empty() ? s.design.names : s.design.labels;
  r.n = static_cast<std::size_t>(s.design.x.rows());
  r.k = static_cast<std::size_t>(s.design.x.cols());
  r.has_intercept = !r.names.empty() && r.names.front() == "(Intercept)";
  r.coef = ls.coef;
  const Eigen::VectorXd e = s.design.y - s.design.x * r.coef;
  r.vcov = ols::cluster_robust_vcov(ls.gram_inverse, xhat, e, s.design.clusters);
  r.se = r.vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
  r.clusters = ols::count_clusters(s.design.clusters);
  r.ssr = e.squaredNorm();
  const double n = static_cast<double>(r.n);
  r.tss = r.has_intercept ? (s.design.y.array() - s.design.y.mean()).matrix().squaredNorm()
                          : s.design.y.squaredNorm();
  r.r2 = r.tss > 0.0 ? 1.0 - r.ssr / r.tss : std::numeric_limits<double>::quiet_NaN();
  r.adj_r2 = 1.0 - (1.0 - r.r2) * (r.has_intercept ? n - 1.0 : n) / (n - static_cast<double>(r.k));
  r.rmse = std::sqrt(r.ssr / n);
  return r;
}

HansenJ hansen_j(const IvSystem& s, const Eigen::VectorXd& beta_2sls) {
  HansenJ out;
  const auto over = s.instruments.cols() - static_cast<Eigen::Index>(s.endogenous.size());
  if (over <= 0) return out;
  const Eigen::MatrixXd z = instrument_matrix(s, nullptr);
  const auto& x = s.design.x;
  const auto& y = s.design.y;
  const double n = static_cast<double>(x.rows());
  const auto l = z.cols();

  const Eigen::VectorXd e = y - x * beta_2sls;
  std::map<std::string, Eigen::VectorXd> sums;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto [it, _] = sums.try_emplace(s.design.clusters[static_cast<std::size_t>(i)],
                                    Eigen::VectorXd::Zero(l));
    it->second.noalias() += z.row(i).transpose() * e(i);
  }
  Eigen::MatrixXd shat = Eigen::MatrixXd::Zero(l, l);
  for (const auto& [_, v] : sums) shat.noalias() += v * v.transpose();
  shat /= n;
  Eigen::LDLT<Eigen::MatrixXd> w(shat);
  if (w.info() != Eigen::Success || !w.isPositive() ||
      w.vectorD().minCoeff() <= 1e-14 * w.vectorD().maxCoeff()) {
    throw NumericalError("hansen_j: clustered moment covariance is singular");
  }
  const Eigen::MatrixXd zx = z.transpose() * x;
  const Eigen::VectorXd zy = z.transpose() * y;
  const Eigen::MatrixXd a = zx.transpose() * w.solve(zx);
  const Eigen::VectorXd beta = a.ldlt().solve(zx.transpose() * w.solve(zy));
  const Eigen::VectorXd mbar = z.transpose() * (y - x * beta) / n;
  out.statistic = n * mbar.dot(w.solve(mbar));
  out.df = static_cast<int>(over);
  out.p_value = chi_squared_upper_p(out.statistic, static_cast<double>(over));
  out.testable = true;
  return out;
}

IvResult fit_iv(const IvSystem& s, std::string label) {
  IvResult out;
  out.label = label;
  out.report = fit_2sls(s, std::move(label));
  for (std::size_t j = 0; j < s.endogenous.size(); ++j) out.first_stages.push_back(first_stage(s, j));
  out.hansen = hansen_j(s, out.report.coef);
  out.instruments_used = s.instrument_names;
  return out;
}

IvSystem drop_instrument(const IvSystem& s, std::size_t index) {
  if (index >= s.instrument_names.size()) throw StructuralError("drop_instrument: bad index");
  IvSystem out = s;
  const auto m = s.instruments.cols();
  out.instruments.resize(s.instruments.rows(), m - 1);
  Eigen::Index j = 0;
  for (Eigen::Index c = 0; c < m; ++c) {
    if (static_cast<std::size_t>(c) != index) out.instruments.col(j++) = s.instruments.col(c);
  }
  out.instrument_names.erase(out.instrument_names.begin() + static_cast<std::ptrdiff_t>(index));
  return out;
}

std::vector<IvResult> fit_with_leave_one_out(const IvSystem& s, const std::string& label) {
  const std::size_t m = s.instrument_names.size();
  std::vector<IvResult> out(m + 1);
  std::vector<std::exception_ptr> errors(m + 1);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t j = 0; j <= static_cast<std::ptrdiff_t>(m); ++j) {
    const auto u = static_cast<std::size_t>(j);
    try {
      if (u == 0) {
        out[0] = fit_iv(s, label);
      } else {
        out[u] = fit_iv(drop_instrument(s, u - 1), label + " without " + s.instrument_names[u - 1]);
      }
    } catch (...) {
      errors[u] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

IvSystem iv_system_from_panel(const panel::Panel& panel, const InstrumentSet& instruments,
                              EmploymentMode mode) {
  const auto& spec = panel.spec;
  if (!spec.piecewise) throw ConfigError("iv: the split variable must be piecewise");
  if (spec.auxiliary.empty()) {
    throw ConfigError("iv: the employment change must be the first auxiliary variable");
  }
  std::map<std::pair<std::string, std::string>, const InstrumentRow*> lookup;
  for (const auto& r : instruments.rows) lookup[{r.msa_id, r.period}] = &r;

  IvSystem s;
  s.drops = instruments.drops;
  std::vector<const panel::PanelObservation*> rows;
  std::vector<const InstrumentRow*> inst;
  for (const auto& r : panel.rows) {
    auto it = lookup.find({r.msa_id, r.period});
    if (it == lookup.end()) {
      s.drops.push_back({r.msa_id, r.period, "missing instruments"});
      continue;
    }
    rows.push_back(&r);
    inst.push_back(it->second);
  }

  const auto names = ols::split_names(spec);
  const std::string split_label = panel::display_label(spec.split);
  const auto& emp = spec.auxiliary.front();
  auto& d = s.design;
  d.names = {"(Intercept)", names.plus, names.minus};
  d.labels = {"(Intercept)", split_label + " (+)", split_label + " (-)"};
  s.endogenous = {1, 2};
  if (mode == EmploymentMode::kEndogenous) {
    d.names.push_back("d_" + emp.variable);
    d.labels.push_back(panel::display_label(emp));
    s.endogenous.push_back(3);
  } else {
    d.names.push_back("bartik");
    d.labels.push_back("Predicted employment change");
  }
  for (const auto& c : spec.covariates) {
    d.names.push_back("d_" + c.variable);
    d.labels.push_back(panel::display_label(c));
  }
  for (std::size_t p = 1; p < panel.period_labels.size(); ++p) {
    d.names.push_back("period_" + panel.period_labels[p]);
    d.labels.push_back("Period " + panel.period_labels[p]);
  }

  const auto all = InstrumentSet::names();
  const std::size_t first_inst = mode == EmploymentMode::kEndogenous ? 0 : 1;
  s.instrument_names.assign(all.begin() + static_cast<std::ptrdiff_t>(first_inst), all.end());

  const auto n = static_cast<Eigen::Index>(rows.size());
  d.x.resize(n, static_cast<Eigen::Index>(d.names.size()));
  d.y.resize(n);
  s.instruments.resize(n, static_cast<Eigen::Index>(s.instrument_names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = *rows[static_cast<std::size_t>(i)];
    const auto& z = *inst[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    d.x(i, j++) = 1.0;
    d.x(i, j++) = r.split_plus;
    d.x(i, j++) = r.split_minus;
    d.x(i, j++) = mode == EmploymentMode::kEndogenous ? r.auxiliary.front() : z.bartik;
    for (double c : r.covariates) d.x(i, j++) = c;
    for (std::size_t p = 1; p < r.period_dummies.size(); ++p) d.x(i, j++) = r.period_dummies[p];
    d.y(i) = r.outcome_delta;
    d.clusters.push_back(r.cluster);
    for (std::size_t c = 0; c < s.instrument_names.size(); ++c) {
      s.instruments(i, static_cast<Eigen::Index>(c)) = z.values[first_inst + c];
    }
  }
  return s;
}

}  // namespace atlas::shiftshare
