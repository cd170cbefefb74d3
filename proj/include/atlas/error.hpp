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

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace atlas {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input structure: bad rings, duplicate or missing ids.
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Data that cannot support the requested operation (e.g. a region with a
/// positive count and no population to carry it).
class DataError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Rank deficiency, singular systems, overflow guards.
class NumericalError : public Error {
 public:
  using Error::Error;
};

struct IterationRecord {
  int iteration = 0;
  double moment_norm = 0.0;
  double step_norm = 0.0;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<IterationRecord> trajectory)
      : NumericalError(what), trajectory_(std::move(trajectory)) {}

  const std::vector<IterationRecord>& trajectory() const { return trajectory_; }

 private:
  std::vector<IterationRecord> trajectory_;
};

}  // namespace atlas
