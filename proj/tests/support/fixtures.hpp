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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "atlas/geo.hpp"
#include "atlas/interpolate.hpp"

namespace atlas::fixtures {

// Two-layer metro fixture: five CoCs nested in one MSA and three CoCs
// straddling MSA borders. Point memberships are written down by hand so the
// allocation oracle never touches the geometry code.
struct StLouis {
  geo::RegionSet cocs;
  geo::RegionSet msas;
  std::vector<geo::WeightedPoint> points;
  std::vector<std::string> point_coc;  // "" when outside every CoC
  std::vector<std::string> point_msa;  // "" when outside every MSA
  std::map<int, interpolate::RegionTotals> counts;
};

StLouis st_louis();

// Spreadsheet-style allocation: per-CoC population shares summed by MSA.
struct ManualAllocation {
  std::map<std::string, double> msa_totals;
  double excluded = 0.0;
};
ManualAllocation manual_allocation(const StLouis& f, int year);

void write_text(const std::filesystem::path& path, const std::string& text);

struct DemoOptions {
  std::size_t msas = 60;
  std::uint64_t seed = 7;
  bool market = true;
};

// Writes a complete synthetic input set plus config.json into `dir` and
// returns the config path.
std::filesystem::path write_demo(const std::filesystem::path& dir, const DemoOptions& options = {});

}  // namespace atlas::fixtures
