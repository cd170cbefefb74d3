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
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <omp.h>

#include "CLI11.hpp"
#include "atlas/error.hpp"
#include "atlas/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Metro homelessness atlas: interpolation, panel regressions and market simulation"};
  app.set_version_flag("--version", std::string(atlas::pipeline::kVersion));
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> preset;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  int jobs = 0;

  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"interpolate", "Reallocate CoC counts onto MSAs by block-group population"},
      {"panel", "Build first-difference panels for a preset"},
      {"estimate", "Fit OLS, method-of-moments or shift-share IV presets"},
      {"simulate", "Run the housing market simulation"},
      {"validate", "Correlate crowding with chronic homelessness"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", config, "JSON configuration file")->required()->check(CLI::ExistingFile);
    sub->add_option("--preset", preset, "Preset or group name");
    sub->add_option("--out", out, "Output directory (overrides output_dir)");
    sub->add_option("--jobs", jobs, "Worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
    sub->add_option("--seed", seed, "Override the configured seed");
  }

  CLI11_PARSE(app, argc, argv);
  if (jobs > 0) omp_set_num_threads(jobs);

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const auto cfg = atlas::pipeline::load_config(config);
    atlas::pipeline::RunOptions options;
    options.preset = preset;
    if (out) options.out_dir = *out;
    options.seed = seed;
    const auto manifest = atlas::pipeline::run(command, cfg, options);
    for (const auto& f : manifest.outputs) std::cout << f.path << '\n';
  } catch (const atlas::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    for (const auto& r : e.trajectory()) {
      std::cerr << "  iter " << r.iteration << "  |m| " << r.moment_norm << "  |step| "
                << r.step_norm << '\n';
    }
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
