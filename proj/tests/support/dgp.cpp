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
#include "support/dgp.hpp"

#include <cmath>
#include <string>

namespace atlas::dgp {

ols::DesignMatrix equal_split(std::mt19937_64& rng, std::size_t msas, double slope) {
  std::normal_distribution<double> z(0.0, 1.0);
  const std::size_t n = 2 * msas;
  ols::DesignMatrix d;
  d.x.resize(static_cast<Eigen::Index>(n), 4);
  d.y.resize(static_cast<Eigen::Index>(n));
  d.names = {"(Intercept)", "rent_plus", "rent_minus", "period_2"};
  for (std::size_t m = 0; m < msas; ++m) {
    const double cluster_shock = 0.5 * z(rng);
    for (std::size_t t = 0; t < 2; ++t) {
      const auto i = static_cast<Eigen::Index>(2 * m + t);
      const double delta = 0.1 * z(rng);
      d.x(i, 0) = 1.0;
      d.x(i, 1) = std::max(delta, 0.0);
      d.x(i, 2) = std::min(delta, 0.0);
      d.x(i, 3) = t == 1 ? 1.0 : 0.0;
      d.y(i) = 1.0 + slope * delta + 0.2 * d.x(i, 3) + cluster_shock + z(rng);
      d.clusters.push_back("m" + std::to_string(m));
    }
  }
  return d;
}

shiftshare::IvSystem iv_system(std::mt19937_64& rng, const IvDgp& o) {
  std::normal_distribution<double> z(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(o.msas);
  shiftshare::IvSystem s;
  s.design.x.resize(n, 2);
  s.design.y.resize(n);
  s.design.names = {"(Intercept)", "rent"};
  s.instruments.resize(n, 4);
  s.instrument_names = {"z1", "z2", "z3", "z4"};
  s.endogenous = {1};
  for (Eigen::Index i = 0; i < n; ++i) {
    double zsum = 0.0;
    for (int k = 0; k < 4; ++k) {
      s.instruments(i, k) = z(rng);
      zsum += s.instruments(i, k);
    }
    const double shock = z(rng);
    const double x = 0.3 * zsum + shock + z(rng);
    const double u = o.endogeneity * shock + z(rng) + o.invalid * s.instruments(i, 3);
    s.design.x(i, 0) = 1.0;
    s.design.x(i, 1) = x;
    s.design.y(i) = 1.0 + o.beta * x + u;
    s.design.clusters.push_back("m" + std::to_string(i));
  }
  return s;
}

qdgmm::QDData qd_panel(std::mt19937_64& rng, std::size_t msas, const Eigen::VectorXd& beta, bool noise) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::gamma_distribution<double> gamma(4.0, 0.25);
  qdgmm::QDData d;
  d.names = {"x1", "x2", "period_a", "period_b"};
  d.labels = d.names;
  d.pairs.reserve(2 * msas);
  for (std::size_t i = 0; i < msas; ++i) {
    const double c = std::exp(z(rng));
    double x[3][2];
    double y[3];
    for (int t = 0; t < 3; ++t) {
      x[t][0] = 0.5 * z(rng);
      x[t][1] = z(rng);
      const double trend = t == 0 ? 0.0 : (t == 1 ? beta(2) : beta(2) + beta(3));
      y[t] = c * std::exp(x[t][0] * beta(0) + x[t][1] * beta(1) + trend) * (noise ? gamma(rng) : 1.0);
    }
    for (int t = 1; t < 3; ++t) {
      qdgmm::QDPair p;
      p.msa_id = "m" + std::to_string(i);
      p.period = t == 1 ? "a" : "b";
      p.y_t = y[t];
      p.y_prev = y[t - 1];
      p.dx = Eigen::VectorXd::Zero(4);
      p.dx(0) = x[t][0] - x[t - 1][0];
      p.dx(1) = x[t][1] - x[t - 1][1];
      p.dx(t + 1) = 1.0;
      d.pairs.push_back(std::move(p));
    }
  }
  return d;
}

}  // namespace atlas::dgp
