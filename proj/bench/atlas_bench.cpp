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
// Parallel kernels against their serial reference implementations.
// Run with OMP_NUM_THREADS set to compare thread counts.

#include <random>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "atlas/geo.hpp"
#include "atlas/qdgmm.hpp"

namespace {

using namespace atlas;

struct Grid {
  geo::RegionSet regions;
  std::vector<geo::WeightedPoint> points;
};

Grid make_grid(int side, std::size_t points) {
  Grid g;
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      g.regions.polygons.push_back(
          geo::make_polygon("r" + std::to_string(i * side + j), geo::rectangle(i, j, i + 1, j + 1)));
    }
  }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, side);
  for (std::size_t k = 0; k < points; ++k) g.points.push_back({"p" + std::to_string(k), u(rng), u(rng), 1.0});
  return g;
}

qdgmm::QDData make_qd(std::size_t msas) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  std::gamma_distribution<double> noise(4.0, 0.25);
  qdgmm::QDData d;
  d.names = {"x1", "x2", "x3", "x4"};
  d.labels = d.names;
  for (std::size_t m = 0; m < msas; ++m) {
    for (int t = 0; t < 2; ++t) {
      qdgmm::QDPair p;
      p.msa_id = "m" + std::to_string(m);
      p.period = std::to_string(t);
      p.dx = Eigen::VectorXd(4);
      for (int j = 0; j < 4; ++j) p.dx(j) = z(rng);
      p.y_prev = 1.0 + noise(rng);
      p.y_t = p.y_prev * std::exp(0.2 * p.dx.sum()) * noise(rng);
      d.pairs.push_back(std::move(p));
    }
  }
  return d;
}

void BM_AssignIndexed(benchmark::State& state) {
  const auto g = make_grid(static_cast<int>(state.range(0)), 50000);
  for (auto _ : state) benchmark::DoNotOptimize(geo::assign_points(g.points, g.regions));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.points.size()));
}

void BM_AssignReference(benchmark::State& state) {
  const auto g = make_grid(static_cast<int>(state.range(0)), 50000);
  for (auto _ : state) benchmark::DoNotOptimize(geo::reference::assign_points(g.points, g.regions));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.points.size()));
}

void BM_MomentsParallel(benchmark::State& state) {
  const auto d = make_qd(static_cast<std::size_t>(state.range(0)));
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(4, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qdgmm::sample_moments(beta, d));
    benchmark::DoNotOptimize(qdgmm::moment_jacobian(beta, d));
  }
}

void BM_MomentsReference(benchmark::State& state) {
  const auto d = make_qd(static_cast<std::size_t>(state.range(0)));
  const Eigen::VectorXd beta = Eigen::VectorXd::Constant(4, 0.1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(qdgmm::reference::sample_moments(beta, d));
    benchmark::DoNotOptimize(qdgmm::reference::moment_jacobian(beta, d));
  }
}

}  // namespace

BENCHMARK(BM_AssignIndexed)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssignReference)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MomentsParallel)->Arg(1000)->Arg(20000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MomentsReference)->Arg(1000)->Arg(20000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
