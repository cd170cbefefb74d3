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
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "atlas/market.hpp"
#include "atlas/panel.hpp"

namespace atlas::pipeline {

inline constexpr const char* kVersion = "0.1.0";

struct InterpolationInputs {
  std::map<int, std::filesystem::path> source_geometries;  // per year (vintage)
  std::filesystem::path target_geometries;
  std::filesystem::path points;
  std::filesystem::path counts;
  std::string source_id_key = "GEOID";
  std::string target_id_key = "GEOID";
  std::map<int, std::set<std::string>> exclusions;
};

struct MarketSettings {
  market::MarketConfig config = market::default_config();
  int periods = 20;
  std::map<int, double> shocks;
  double asymmetry_shift = 0.1;
  bool bridge = false;
  std::size_t bridge_seeds = 1;
  market::BridgeConfig bridge_config;
};

/// Declarative run configuration (JSON). Relative paths resolve against the
/// directory of the config file.
struct PipelineConfig {
  std::filesystem::path config_path;
  std::string config_text;
  std::filesystem::path base_dir;

  std::optional<InterpolationInputs> interpolation;
  std::optional<std::filesystem::path> series;
  std::optional<std::filesystem::path> deflator;
  std::optional<std::filesystem::path> eta;
  std::optional<std::filesystem::path> industry_shares;
  std::optional<std::filesystem::path> national_growth;

  std::vector<std::pair<int, int>> periods{{2011, 2016}, {2016, 2020}};
  std::vector<std::pair<int, int>> long_periods{{2011, 2020}};
  panel::DerivedOptions derived;
  double outcome_scale = 1.0;  // applied to quasi-differenced specifications
  std::vector<std::string> presets;
  std::map<std::string, panel::SpecConfig> custom_specs;
  std::vector<int> validate_years{2011, 2016, 2020};
  std::vector<double> margins_grid;

  MarketSettings market;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                            const std::filesystem::path& config_path = {});

panel::SpecConfig parse_spec(const nlohmann::json& j);

/// A named preset expands to one or more specification columns.
struct PresetGroup {
  std::string name;
  std::string title;
  std::vector<panel::SpecConfig> specs;
};

std::vector<std::string> builtin_preset_names();
/// Throws ConfigError naming the preset when it is unknown.
PresetGroup resolve_preset(const std::string& name, const PipelineConfig& config);

struct StageRecord {
  std::string name;
  std::size_t rows = 0;
  std::size_t drops = 0;
  double wall_ms = 0.0;
};

struct FileDigest {
  std::string path;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  std::string preset;
  std::string config_sha256;
  std::vector<FileDigest> inputs;
  std::vector<FileDigest> outputs;
  std::vector<StageRecord> stages;
  std::map<std::string, std::string> drop_logs;  // stage -> drop-log file
  std::uint64_t seed = 0;
};

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

struct RunOptions {
  std::optional<std::string> preset;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
};

RunManifest cmd_interpolate(const PipelineConfig& config, const RunOptions& options);
RunManifest cmd_panel(const PipelineConfig& config, const RunOptions& options);
RunManifest cmd_estimate(const PipelineConfig& config, const RunOptions& options);
RunManifest cmd_simulate(const PipelineConfig& config, const RunOptions& options);
RunManifest cmd_validate(const PipelineConfig& config, const RunOptions& options);

/// Dispatches by command name; writes manifest.json next to the outputs.
RunManifest run(const std::string& command, const PipelineConfig& config, const RunOptions& options);

}  // namespace atlas::pipeline
