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
#include "atlas/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <string_view>
#include <unordered_set>

#include "atlas/error.hpp"

namespace atlas::geo {

namespace {

bool finite(Coord c) { return std::isfinite(c.x) && std::isfinite(c.y); }

bool on_segment(Coord p, Coord a, Coord b) {
  const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
  if (cross != 0.0) return false;
  return p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) && p.y >= std::min(a.y, b.y) &&
         p.y <= std::max(a.y, b.y);
}

// Even-odd over every ring in the part. Returns true early on any edge hit.
bool in_part(Coord p, const PolygonPart& part) {
  bool inside = false;
  for (const Ring& ring : part.rings) {
    for (std::size_t i = 0, j = ring.size() - 1; i < ring.size(); j = i++) {
      const Coord a = ring[j];
      const Coord b = ring[i];
      if (on_segment(p, a, b)) return true;
      if ((a.y > p.y) != (b.y > p.y)) {
        const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < x_cross) inside = !inside;
      }
    }
  }
  return inside;
}

double orient(Coord a, Coord b, Coord c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool segments_cross(Coord a, Coord b, Coord c, Coord d) {
  const double o1 = orient(a, b, c);
  const double o2 = orient(a, b, d);
  const double o3 = orient(c, d, a);
  const double o4 = orient(c, d, b);
  if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
    return true;
  }
  return (o1 == 0 && on_segment(c, a, b)) || (o2 == 0 && on_segment(d, a, b)) ||
         (o3 == 0 && on_segment(a, c, d)) || (o4 == 0 && on_segment(b, c, d));
}

std::vector<std::size_t> id_ranks(const RegionSet& regions) {
  std::vector<std::size_t> order(regions.polygons.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return regions.polygons[a].id < regions.polygons[b].id;
  });
  std::vector<std::size_t> rank(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

// Shared tail of the indexed and brute-force kernels: chosen[i] holds the
// winning polygon (or npos) and claims[i] the full claim list when > 1.
Assignment finish_assignment(std::span<const WeightedPoint> points, const RegionSet& regions,
                             const std::vector<std::size_t>& chosen,
                             const std::vector<std::vector<std::uint32_t>>& claims) {
  Assignment out;
  out.point_ids.reserve(points.size());
  out.region_ids.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    out.point_ids.push_back(points[i].id);
    if (chosen[i] == std::numeric_limits<std::size_t>::max()) {
      out.region_ids.emplace_back(std::nullopt);
    } else {
      out.region_ids.emplace_back(regions.polygons[chosen[i]].id);
    }
    if (claims[i].size() > 1) {
      OverlapWarning w;
      w.point_id = points[i].id;
      for (auto idx : claims[i]) w.region_ids.push_back(regions.polygons[idx].id);
      std::sort(w.region_ids.begin(), w.region_ids.end());
      w.chosen = w.region_ids.front();
      out.overlaps.push_back(std::move(w));
    }
  }
  return out;
}

}  // namespace

Ring rectangle(double x0, double y0, double x1, double y1) {
  return Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}, {x0, y0}};
}

RegionPolygon make_polygon(std::string id, Ring exterior, std::vector<Ring> holes) {
  PolygonPart part;
  part.rings.push_back(std::move(exterior));
  for (auto& h : holes) part.rings.push_back(std::move(h));
  RegionPolygon poly;
  poly.id = std::move(id);
  poly.parts.push_back(std::move(part));
  return poly;
}

BBox bounding_box(const RegionPolygon& poly) {
  BBox b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& part : poly.parts) {
    if (part.rings.empty()) continue;
    for (const Coord& c : part.rings.front()) {
      b.min_x = std::min(b.min_x, c.x);
      b.min_y = std::min(b.min_y, c.y);
      b.max_x = std::max(b.max_x, c.x);
      b.max_y = std::max(b.max_y, c.y);
    }
  }
  return b;
}

void validate(const RegionPolygon& poly) {
  const std::string where = "region '" + poly.id + "'";
  if (poly.parts.empty()) throw StructuralError(where + ": no polygon parts");
  for (std::size_t p = 0; p < poly.parts.size(); ++p) {
    const auto& rings = poly.parts[p].rings;
    if (rings.empty()) {
      throw StructuralError(where + " part " + std::to_string(p) + ": no exterior ring");
    }
    for (std::size_t r = 0; r < rings.size(); ++r) {
      const Ring& ring = rings[r];
      const std::string ring_name = where + " part " + std::to_string(p) + " ring " +
                                    std::to_string(r) + (r == 0 ? " (exterior)" : " (interior)");
      if (ring.size() < 4) {
        throw StructuralError(ring_name + ": " + std::to_string(ring.size()) +
                              " vertices, need at least 4");
      }
      for (std::size_t v = 0; v < ring.size(); ++v) {
        if (!finite(ring[v])) {
          throw StructuralError(ring_name + " vertex " + std::to_string(v) +
                                ": non-finite coordinate");
        }
      }
      if (!(ring.front() == ring.back())) {
        throw StructuralError(ring_name + " vertex " + std::to_string(ring.size() - 1) +
                              ": ring not closed (last vertex differs from first)");
      }
    }
  }
}

void validate(const RegionSet& regions) {
  std::unordered_set<std::string_view> seen;
  for (const auto& poly : regions.polygons) {
    validate(poly);
    if (!seen.insert(poly.id).second) {
      throw StructuralError("region set '" + regions.name + "': duplicate region id '" + poly.id +
                            "'");
    }
  }
}

void validate_points(std::span<const WeightedPoint> points) {
  std::unordered_set<std::string_view> seen;
  seen.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
      throw StructuralError("point '" + p.id + "': non-finite coordinates");
    }
    if (!std::isfinite(p.weight) || p.weight < 0.0) {
      throw StructuralError("point '" + p.id + "': weight must be finite and >= 0");
    }
    if (!seen.insert(p.id).second) throw StructuralError("duplicate point id '" + p.id + "'");
  }
}

bool point_in_polygon_unchecked(Coord p, const RegionPolygon& poly) {
  for (const auto& part : poly.parts) {
    if (in_part(p, part)) return true;
  }
  return false;
}

bool point_in_polygon(Coord p, const RegionPolygon& poly) {
  validate(poly);
  return point_in_polygon_unchecked(p, poly);
}

std::vector<std::string> self_intersection_warnings(const RegionPolygon& poly,
                                                    std::size_t max_pairs) {
  std::vector<std::string> out;
  std::mt19937_64 rng(0x5eedULL);
  for (std::size_t p = 0; p < poly.parts.size(); ++p) {
    for (std::size_t r = 0; r < poly.parts[p].rings.size(); ++r) {
      const Ring& ring = poly.parts[p].rings[r];
      if (ring.size() < 4) continue;
      const std::size_t m = ring.size() - 1;  // edges
      auto report = [&](std::size_t i, std::size_t j) {
        const std::size_t gap = j > i ? j - i : i - j;
        if (gap <= 1 || gap == m - 1) return;  // adjacent edges share a vertex
        if (segments_cross(ring[i], ring[i + 1], ring[j], ring[j + 1])) {
          out.push_back("region '" + poly.id + "' part " + std::to_string(p) + " ring " +
                        std::to_string(r) + ": edges " + std::to_string(i) + " and " +
                        std::to_string(j) + " intersect");
        }
      };
      const std::size_t total = m * (m - 1) / 2;
      if (total <= max_pairs) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = i + 1; j < m; ++j) report(i, j);
        }
      } else {
        std::uniform_int_distribution<std::size_t> pick(0, m - 1);
        for (std::size_t s = 0; s < max_pairs; ++s) {
          std::size_t i = pick(rng);
          std::size_t j = pick(rng);
          if (i == j) continue;
          report(std::min(i, j), std::max(i, j));
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
      }
    }
  }
  return out;
}

SpatialIndex::SpatialIndex(const RegionSet& regions) {
  const std::size_t n = regions.polygons.size();
  if (n == 0) return;
  boxes_.reserve(n);
  extent_ = bounding_box(regions.polygons.front());
  for (const auto& poly : regions.polygons) {
    boxes_.push_back(bounding_box(poly));
    const BBox& b = boxes_.back();
    extent_.min_x = std::min(extent_.min_x, b.min_x);
    extent_.min_y = std::min(extent_.min_y, b.min_y);
    extent_.max_x = std::max(extent_.max_x, b.max_x);
    extent_.max_y = std::max(extent_.max_y, b.max_y);
  }
  // About four cells per polygon, shaped to the extent's aspect ratio.
  const double w = std::max(extent_.max_x - extent_.min_x, 1e-12);
  const double h = std::max(extent_.max_y - extent_.min_y, 1e-12);
  const double target = 4.0 * static_cast<double>(n);
  nx_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(std::sqrt(target * w / h))), 1,
                                2048);
  ny_ = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(target / nx_)), 1, 2048);
  cell_w_ = w / static_cast<double>(nx_);
  cell_h_ = h / static_cast<double>(ny_);

  auto col = [&](double x) {
    return std::min(nx_ - 1, static_cast<std::size_t>(std::max(0.0, (x - extent_.min_x) / cell_w_)));
  };
  auto row = [&](double y) {
    return std::min(ny_ - 1, static_cast<std::size_t>(std::max(0.0, (y - extent_.min_y) / cell_h_)));
  };

  std::vector<std::uint32_t> counts(nx_ * ny_ + 1, 0);
  for (const auto& b : boxes_) {
    for (std::size_t r = row(b.min_y); r <= row(b.max_y); ++r) {
      for (std::size_t c = col(b.min_x); c <= col(b.max_x); ++c) ++counts[r * nx_ + c + 1];
    }
  }
  offsets_.assign(nx_ * ny_ + 1, 0);
  for (std::size_t i = 1; i < offsets_.size(); ++i) offsets_[i] = offsets_[i - 1] + counts[i];
  entries_.assign(offsets_.back(), 0);
  std::vector<std::uint32_t> fill(offsets_.begin(), offsets_.end() - 1);
  for (std::uint32_t i = 0; i < boxes_.size(); ++i) {
    const auto& b = boxes_[i];
    for (std::size_t r = row(b.min_y); r <= row(b.max_y); ++r) {
      for (std::size_t c = col(b.min_x); c <= col(b.max_x); ++c) entries_[fill[r * nx_ + c]++] = i;
    }
  }
}

std::optional<std::size_t> SpatialIndex::cell_of(Coord p) const {
  if (boxes_.empty() || !extent_.contains(p)) return std::nullopt;
  const auto c = std::min(nx_ - 1, static_cast<std::size_t>((p.x - extent_.min_x) / cell_w_));
  const auto r = std::min(ny_ - 1, static_cast<std::size_t>((p.y - extent_.min_y) / cell_h_));
  return r * nx_ + c;
}

std::vector<std::uint32_t> SpatialIndex::candidates(Coord p) const {
  std::vector<std::uint32_t> out;
  for_each_candidate(p, [&](std::uint32_t idx) { out.push_back(idx); });
  return out;
}

SpatialIndex build_index(const RegionSet& regions) { return SpatialIndex(regions); }

std::size_t Assignment::assigned_count() const {
  return static_cast<std::size_t>(
      std::count_if(region_ids.begin(), region_ids.end(), [](const auto& r) { return r.has_value(); }));
}

Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions) {
  validate(regions);
  return assign_points(points, regions, SpatialIndex(regions));
}

Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions,
                         const SpatialIndex& index) {
  validate_points(points);
  const auto rank = id_ranks(regions);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> chosen(points.size(), kNone);
  std::vector<std::vector<std::uint32_t>> claims(points.size());
  const auto n = static_cast<std::ptrdiff_t>(points.size());

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Coord p{points[i].x, points[i].y};
    std::size_t best = kNone;
    std::vector<std::uint32_t> hits;
    index.for_each_candidate(p, [&](std::uint32_t idx) {
      if (point_in_polygon_unchecked(p, regions.polygons[idx])) {
        hits.push_back(idx);
        if (best == kNone || rank[idx] < rank[best]) best = idx;
      }
    });
    chosen[i] = best;
    if (hits.size() > 1) claims[i] = std::move(hits);
  }
  return finish_assignment(points, regions, chosen, claims);
}

std::vector<std::pair<std::string, std::string>> sample_overlaps(const RegionSet& regions,
                                                                 std::size_t samples_per_polygon,
                                                                 std::uint64_t seed) {
  const SpatialIndex index(regions);
  std::set<std::pair<std::string, std::string>> found;
  for (std::size_t i = 0; i < regions.polygons.size(); ++i) {
    const auto& poly = regions.polygons[i];
    const BBox b = index.box(i);
    std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + i);
    std::uniform_real_distribution<double> ux(b.min_x, b.max_x);
    std::uniform_real_distribution<double> uy(b.min_y, b.max_y);
    for (std::size_t s = 0; s < samples_per_polygon; ++s) {
      const Coord p{ux(rng), uy(rng)};
      if (!point_in_polygon_unchecked(p, poly)) continue;
      index.for_each_candidate(p, [&](std::uint32_t j) {
        if (j == i) return;
        const auto& other = regions.polygons[j];
        if (!point_in_polygon_unchecked(p, other)) return;
        found.insert(std::minmax(poly.id, other.id));
      });
    }
  }
  return {found.begin(), found.end()};
}

namespace reference {

Assignment assign_points(std::span<const WeightedPoint> points, const RegionSet& regions) {
  validate(regions);
  validate_points(points);
  const auto rank = id_ranks(regions);
  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> chosen(points.size(), kNone);
  std::vector<std::vector<std::uint32_t>> claims(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Coord p{points[i].x, points[i].y};
    std::vector<std::uint32_t> hits;
    for (std::uint32_t j = 0; j < regions.polygons.size(); ++j) {
      if (point_in_polygon_unchecked(p, regions.polygons[j])) hits.push_back(j);
    }
    for (auto j : hits) {
      if (chosen[i] == kNone || rank[j] < rank[chosen[i]]) chosen[i] = j;
    }
    if (hits.size() > 1) claims[i] = std::move(hits);
  }
  return finish_assignment(points, regions, chosen, claims);
}

}  // namespace reference

}  // namespace atlas::geo
