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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

// Planar geometry for block-group points and region polygons. Coordinates
// are used as given (lon/lat degrees or projected units); no geodesic math.

namespace atlas::geo {

struct Coord {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

/// A census block-group representative point carrying its population.
/// Whether the point is a geometric centroid or a population-weighted
/// interior point is up to the input file.
struct WeightedPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
  double weight = 0.0;
};

/// Closed vertex sequence, first == last, at least 4 vertices.
using Ring = std::vector<Coord>;

/// rings[0] is the exterior ring, the rest are holes.
struct PolygonPart {
  std::vector<Ring> rings;
};

/// A region (CoC or MSA). Single polygons have one part; GeoJSON
/// MultiPolygons load as several parts under one id.
struct RegionPolygon {
  std::string id;
  std::vector<PolygonPart> parts;
};

struct RegionSet {
  std::string name;
  int vintage = 0;
  std::vector<RegionPolygon> polygons;
};

struct BBox {
  double min_x = 0.0;
  double min_y = 0.0;
  double max_x = 0.0;
  double max_y = 0.0;

  bool contains(Coord p) const {
    return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
  }
  bool intersects(const BBox& o) const {
    return !(o.min_x > max_x || o.max_x < min_x || o.min_y > max_y || o.max_y < min_y);
  }
};

RegionPolygon make_polygon(std::string id, Ring exterior, std::vector<Ring> holes = {});
/// Axis-aligned rectangle as a closed 5-vertex ring.
Ring rectangle(double x0, double y0, double x1, double y1);

BBox bounding_box(const RegionPolygon& poly);

/// Structural checks: at least one part, every ring closed with >= 4 finite
/// vertices. Throws StructuralError naming region, part, ring and vertex.
void validate(const RegionPolygon& poly);
/// validate() on every polygon plus id uniqueness.
void validate(const RegionSet& regions);
void validate_points(std::span<const WeightedPoint> points);

/// Even-odd rule over all rings of each part; a point exactly on any edge
/// counts as inside. Validates the polygon first.
bool point_in_polygon(Coord p, const RegionPolygon& poly);
/// Same test without validation, for callers that validated once up front.
bool point_in_polygon_unchecked(Coord p, const RegionPolygon& poly);

/// Pairs of non-adjacent edges that cross, per ring. Diagnostic only: real
/// shapefiles are tolerated. Rings with many edges are checked on a seeded
/// sample of edge pairs capped at max_pairs.
std::vector<std::string> self_intersection_warnings(const RegionPolygon& poly,
                                                    std::size_t max_pairs = 200000);

/// Uniform grid over polygon bounding boxes. Candidate lookup returns a
/// superset of the polygons that contain the point. Immutable once built and
/// safe to share across threads.
class SpatialIndex {
 public:
  SpatialIndex() = default;
  explicit SpatialIndex(const RegionSet& regions);

  bool empty() const { return boxes_.empty(); }
  std::size_t size() const { return boxes_.size(); }

  /// Indices into RegionSet::polygons whose bounding box holds p, ascending.
  std::vector<std::uint32_t> candidates(Coord p) const;

  template <typename Fn>
  void for_each_candidate(Coord p, Fn&& fn) const {
    const auto cell = cell_of(p);
    if (!cell) return;
    for (std::uint32_t k = offsets_[*cell]; k < offsets_[*cell + 1]; ++k) {
      const std::uint32_t idx = entries_[k];
      if (boxes_[idx].contains(p)) fn(idx);
    }
  }

  const BBox& box(std::size_t i) const { return boxes_[i]; }

 private:
  std::optional<std::size_t> cell_of(Coord p) const;

  std::vector<BBox> boxes_;
  BBox extent_{};
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  double cell_w_ = 1.0;
  double cell_h_ = 1.0;
  std::vector<std::uint32_t> offsets_;
  std::vector<std::uint32_t> entries_;
};

SpatialIndex build_index(const RegionSet& regions);

/// A point claimed by more than one polygon; `chosen` is the smallest id.
struct OverlapWarning {
  std::string point_id;
  std::vector<std::string> region_ids;
  std::string chosen;
};

/// Point id -> containing region id (or none), in input point order.
struct Assignment {
  std::vector<std::string> point_ids;
  std::vector<std::optional<std::string>> region_ids;
  std::vector<OverlapWarning> overlaps;

  std::size_t size() const { return point_ids.size(); }
  std::size_t assigned_count() const;
};

/// Indexed, OpenMP-parallel over points. Output is independent of the
/// thread count.
Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions);
Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions,
                         const SpatialIndex& index);

/// Region pairs found to overlap by testing seeded sample points drawn in
/// each polygon's bounding box. Sorted, deduplicated.
std::vector<std::pair<std::string, std::string>> sample_overlaps(
    const RegionSet& regions, std::size_t samples_per_polygon = 64, std::uint64_t seed = 1);

namespace reference {

/// Serial brute-force scan over every polygon. Kept as the oracle for the
/// indexed kernel and as the serial baseline in benchmarks.
Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions);

}  // namespace reference

}  // namespace atlas::geo
