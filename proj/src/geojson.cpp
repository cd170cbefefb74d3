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
#include "atlas/geojson.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "atlas/csv.hpp"
#include "atlas/error.hpp"

namespace atlas::geo {

using nlohmann::json;

namespace {

Ring parse_ring(const json& coords, const std::string& where) {
  if (!coords.is_array()) throw StructuralError(where + ": ring is not an array");
  Ring ring;
  ring.reserve(coords.size());
  for (std::size_t v = 0; v < coords.size(); ++v) {
    const json& c = coords[v];
    if (!c.is_array() || c.size() < 2 || !c[0].is_number() || !c[1].is_number()) {
      throw StructuralError(where + " vertex " + std::to_string(v) + ": expected [x, y]");
    }
    ring.push_back({c[0].get<double>(), c[1].get<double>()});
  }
  return ring;
}

PolygonPart parse_part(const json& rings, const std::string& where) {
  if (!rings.is_array()) throw StructuralError(where + ": polygon is not an array of rings");
  PolygonPart part;
  for (std::size_t r = 0; r < rings.size(); ++r) {
    part.rings.push_back(parse_ring(rings[r], where + " ring " + std::to_string(r)));
  }
  return part;
}

std::string id_from(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  if (value.is_number()) return value.dump();
  throw StructuralError("region id property must be a string or number");
}

}  // namespace

RegionSet parse_geojson(std::string_view text, std::string name, int vintage,
                        const std::string& id_key) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw StructuralError(name + ": invalid JSON: " + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features")) {
    throw StructuralError(name + ": expected a GeoJSON FeatureCollection");
  }
  RegionSet set;
  set.name = std::move(name);
  set.vintage = vintage;
  const auto& features = doc["features"];
  for (std::size_t f = 0; f < features.size(); ++f) {
    const json& feat = features[f];
    const std::string where = set.name + " feature " + std::to_string(f);
    if (!feat.contains("properties") || !feat["properties"].is_object() ||
        !feat["properties"].contains(id_key)) {
      throw StructuralError(where + ": missing id property '" + id_key + "'");
    }
    RegionPolygon poly;
    poly.id = id_from(feat["properties"][id_key]);
    const json& geom = feat.at("geometry");
    const std::string type = geom.value("type", "");
    const json& coords = geom.at("coordinates");
    if (type == "Polygon") {
      poly.parts.push_back(parse_part(coords, where));
    } else if (type == "MultiPolygon") {
      for (std::size_t p = 0; p < coords.size(); ++p) {
        poly.parts.push_back(parse_part(coords[p], where + " part " + std::to_string(p)));
      }
    } else {
      throw StructuralError(where + ": unsupported geometry type '" + type + "'");
    }
    set.polygons.push_back(std::move(poly));
  }
  validate(set);
  return set;
}

RegionSet read_geojson(const std::filesystem::path& path, int vintage, const std::string& id_key) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open geometry file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_geojson(ss.str(), path.string(), vintage, id_key);
}

std::string to_geojson(const RegionSet& regions, const std::string& id_key) {
  json features = json::array();
  for (const auto& poly : regions.polygons) {
    json parts = json::array();
    for (const auto& part : poly.parts) {
      json rings = json::array();
      for (const auto& ring : part.rings) {
        json r = json::array();
        for (const auto& c : ring) r.push_back({c.x, c.y});
        rings.push_back(std::move(r));
      }
      parts.push_back(std::move(rings));
    }
    json geom;
    if (parts.size() == 1) {
      geom = {{"type", "Polygon"}, {"coordinates", parts[0]}};
    } else {
      geom = {{"type", "MultiPolygon"}, {"coordinates", parts}};
    }
    features.push_back(
        {{"type", "Feature"}, {"properties", {{id_key, poly.id}}}, {"geometry", geom}});
  }
  return json{{"type", "FeatureCollection"}, {"features", features}}.dump();
}

std::vector<WeightedPoint> read_points_csv(const std::filesystem::path& path) {
  const auto table = csv::read_file(path);
  table.require_columns({"geoid", "x", "y", "population"});
  const auto c_id = table.column("geoid");
  const auto c_x = table.column("x");
  const auto c_y = table.column("y");
  const auto c_pop = table.column("population");
  std::vector<WeightedPoint> points;
  points.reserve(table.size());
  for (std::size_t r = 0; r < table.size(); ++r) {
    points.push_back(
        {table.cell(r, c_id), table.number(r, c_x), table.number(r, c_y), table.number(r, c_pop)});
  }
  validate_points(points);
  return points;
}

}  // namespace atlas::geo
