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

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "atlas/geo.hpp"

namespace atlas::geo {

/// Parses a GeoJSON FeatureCollection of Polygon / MultiPolygon features.
/// The region id is read from `properties[id_key]` (string or number).
RegionSet parse_geojson(std::string_view text, std::string name, int vintage,
                        const std::string& id_key = "GEOID");
RegionSet read_geojson(const std::filesystem::path& path, int vintage,
                       const std::string& id_key = "GEOID");

std::string to_geojson(const RegionSet& regions, const std::string& id_key = "GEOID");

/// Points CSV with columns geoid,x,y,population.
std::vector<WeightedPoint> read_points_csv(const std::filesystem::path& path);

}  // namespace atlas::geo
