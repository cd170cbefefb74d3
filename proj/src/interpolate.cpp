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
#include "atlas/interpolate.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <unordered_map>

#include "atlas/error.hpp"
#include "atlas/numeric.hpp"

namespace atlas::interpolate {

PointAllocation disaggregate(const RegionTotals& totals, const geo::Assignment& source_assignment,
                             std::span<const geo::WeightedPoint> points) {
  if (source_assignment.size() != points.size()) {
    throw StructuralError("disaggregate: assignment covers " +
                          std::to_string(source_assignment.size()) + " points, point set has " +
                          std::to_string(points.size()));
  }
  for (const auto& [id, h] : totals) {
    if (!std::isfinite(h) || h < 0.0) {
      throw DataError("source region '" + id + "': count must be finite and >= 0");
    }
  }

  struct RegionAccum {
    KahanSum population;
    std::size_t points = 0;
  };
  std::map<std::string, RegionAccum> accum;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (source_assignment.point_ids[i] != points[i].id) {
      throw StructuralError("disaggregate: point order mismatch at index " + std::to_string(i) +
                            " ('" + source_assignment.point_ids[i] + "' vs '" + points[i].id +
                            "')");
    }
    const auto& region = source_assignment.region_ids[i];
    if (!region) continue;
    auto& a = accum[*region];
    a.population.add(points[i].weight);
    ++a.points;
  }

  for (const auto& [id, h] : totals) {
    if (h <= 0.0) continue;
    auto it = accum.find(id);
    if (it == accum.end() || it->second.points == 0) {
      throw DataError("source region '" + id + "' has count " + format_double(h) +
                      " but no assigned block-group points");
    }
    if (!(it->second.population.value() > 0.0)) {
      throw DataError("source region '" + id + "' has count " + format_double(h) +
                      " but zero total population");
    }
  }

  PointAllocation out;
  out.point_ids = source_assignment.point_ids;
  out.counts.assign(points.size(), 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& region = source_assignment.region_ids[i];
    if (!region) continue;
    auto t = totals.find(*region);
    if (t == totals.end() || t->second == 0.0) continue;
    const double pop = accum[*region].population.value();
    out.counts[i] = t->second * (points[i].weight / pop);
  }
  return out;
}

TargetTotals aggregate(const PointAllocation& allocation, const geo::Assignment& target_assignment) {
  const auto& ids = allocation.point_ids;
  std::vector<std::size_t> target_row(ids.size());
  bool aligned = ids.size() == target_assignment.size();
  for (std::size_t i = 0; aligned && i < ids.size(); ++i) {
    aligned = ids[i] == target_assignment.point_ids[i];
    target_row[i] = i;
  }
  if (!aligned) {
    std::unordered_map<std::string, std::size_t> pos;
    pos.reserve(target_assignment.size());
    for (std::size_t i = 0; i < target_assignment.size(); ++i) {
      pos.emplace(target_assignment.point_ids[i], i);
    }
    std::vector<std::string> missing;
    std::unordered_map<std::string, bool> in_alloc;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      in_alloc.emplace(ids[i], true);
      auto it = pos.find(ids[i]);
      if (it == pos.end()) {
        missing.push_back(ids[i]);
      } else {
        target_row[i] = it->second;
      }
    }
    for (const auto& id : target_assignment.point_ids) {
      if (!in_alloc.count(id)) missing.push_back(id);
    }
    if (!missing.empty() || ids.size() != target_assignment.size()) {
      std::sort(missing.begin(), missing.end());
      std::string list;
      for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
        list += (i ? ", " : "") + missing[i];
      }
      if (missing.size() > 20) list += ", ... (" + std::to_string(missing.size()) + " total)";
      throw StructuralError("aggregate: allocation and target assignment disagree on point ids: " +
                            list);
    }
  }

  std::map<std::string, KahanSum> sums;
  KahanSum excluded;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& region = target_assignment.region_ids[target_row[i]];
    if (region) {
      sums[*region].add(allocation.counts[i]);
    } else {
      excluded.add(allocation.counts[i]);
    }
  }
  TargetTotals out;
  for (const auto& [id, s] : sums) out.totals.emplace(id, s.value());
  out.excluded_mass = excluded.value();
  return out;
}

InterpolationResult interpolate_counts(const geo::RegionSet& source, const geo::RegionSet& target,
                                       std::span<const geo::WeightedPoint> points,
                                       const std::map<int, RegionTotals>& totals_by_year,
                                       const std::map<int, std::set<std::string>>& exclusions) {
  geo::validate(source);
  geo::validate(target);
  std::set<std::string> source_ids;
  for (const auto& p : source.polygons) source_ids.insert(p.id);
  for (const auto& [year, totals] : totals_by_year) {
    for (const auto& [id, h] : totals) {
      if (!source_ids.count(id)) {
        throw StructuralError("year " + std::to_string(year) + ": count for region '" + id +
                              "' which is not in source region set '" + source.name + "'");
      }
    }
  }

  const auto source_assign = geo::assign_points(points, source);
  const auto target_assign = geo::assign_points(points, target);

  InterpolationResult result;
  auto& diag = result.diagnostics;
  std::map<std::string, KahanSum> pop_by_source;
  for (const auto& p : source.polygons) {
    diag.source_point_counts[p.id] = 0;
    pop_by_source[p.id];
  }
  for (const auto& p : target.polygons) diag.target_point_counts[p.id] = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (const auto& r = source_assign.region_ids[i]) {
      ++diag.source_point_counts[*r];
      pop_by_source[*r].add(points[i].weight);
    } else {
      ++diag.points_outside_source;
    }
    if (const auto& r = target_assign.region_ids[i]) {
      ++diag.target_point_counts[*r];
    } else {
      ++diag.points_outside_target;
    }
  }
  for (const auto& [id, pop] : pop_by_source) {
    if (!(pop.value() > 0.0)) diag.zero_population_regions.push_back(id);
  }
  diag.source_overlaps = source_assign.overlaps;
  diag.target_overlaps = target_assign.overlaps;

  std::vector<int> years;
  for (const auto& [y, _] : totals_by_year) years.push_back(y);
  result.years.resize(years.size());
  std::vector<std::exception_ptr> errors(years.size());

#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(years.size()); ++k) {
    try {
      const int year = years[k];
      RegionTotals totals = totals_by_year.at(year);
      YearResult yr;
      yr.year = year;
      if (auto ex = exclusions.find(year); ex != exclusions.end()) {
        for (const auto& id : ex->second) {
          if (auto it = totals.find(id); it != totals.end()) {
            yr.excluded_regions.emplace(id, it->second);
            totals.erase(it);
          }
        }
      }
      KahanSum mass;
      for (const auto& [id, h] : totals) mass.add(h);
      yr.source_mass = mass.value();
      const auto alloc = disaggregate(totals, source_assign, points);
      yr.target = aggregate(alloc, target_assign);
      for (const auto& p : target.polygons) yr.target.totals.try_emplace(p.id, 0.0);
      yr.excluded_share = yr.source_mass > 0.0 ? yr.target.excluded_mass / yr.source_mass : 0.0;
      result.years[k] = std::move(yr);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

}  // namespace atlas::interpolate
