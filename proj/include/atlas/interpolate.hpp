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
#include <set>
#include <span>
#include <string>
#include <vector>

#include "atlas/geo.hpp"

// Population-weighted areal interpolation: source-region totals are spread
// over block-group points in proportion to population, then re-summed inside
// the target regions. Mass is conserved exactly up to rounding; mass that
// lands outside every target region is reported, never dropped.

namespace atlas::interpolate {

/// Source region id -> count for one year.
using RegionTotals = std::map<std::string, double>;

struct PointAllocation {
  std::vector<std::string> point_ids;
  std::vector<double> counts;
};

struct TargetTotals {
  std::map<std::string, double> totals;
  double excluded_mass = 0.0;
};

/// h_g = H_c * Pop_g / sum(Pop in c). Points outside every source region get 0.
/// Throws DataError when a region with a positive total has no points or no
/// population.
PointAllocation disaggregate(const RegionTotals& totals, const geo::Assignment& source_assignment,
                             std::span<const geo::WeightedPoint> points);

/// H_m = sum of h_g over points in m; unassigned points go to excluded_mass.
/// Throws StructuralError if the point ids differ between the two inputs.
TargetTotals aggregate(const PointAllocation& allocation, const geo::Assignment& target_assignment);

struct YearResult {
  int year = 0;
  TargetTotals target;
  double source_mass = 0.0;
  double excluded_share = 0.0;
  /// Source regions removed by the per-year exclusion list, with their counts.
  std::map<std::string, double> excluded_regions;
};

struct Diagnostics {
  std::map<std::string, std::size_t> source_point_counts;
  std::map<std::string, std::size_t> target_point_counts;
  std::vector<std::string> zero_population_regions;
  std::vector<geo::OverlapWarning> source_overlaps;
  std::vector<geo::OverlapWarning> target_overlaps;
  std::size_t points_outside_source = 0;
  std::size_t points_outside_target = 0;
};

struct InterpolationResult {
  std::vector<YearResult> years;  // ascending by year
  Diagnostics diagnostics;
};

/// Composition of the three steps for every year in `totals_by_year`.
/// `exclusions` lists source region ids to drop per year (boundary changes
/// handled upstream). Years run in parallel; results do not depend on the
/// thread count.
InterpolationResult interpolate_counts(const geo::RegionSet& source, const geo::RegionSet& target,
                                       std::span<const geo::WeightedPoint> points,
                                       const std::map<int, RegionTotals>& totals_by_year,
                                       const std::map<int, std::set<std::string>>& exclusions = {});

}  // namespace atlas::interpolate
