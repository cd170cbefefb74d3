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
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace atlas::csv {

/// A header-indexed CSV table held in memory. Cells are kept as text; the
/// typed accessors report the row number and column on conversion failure.
class Table {
 public:
  Table() = default;
  Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows,
        std::string source);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t size() const { return rows_.size(); }
  bool has_column(std::string_view name) const;
  std::size_t column(std::string_view name) const;

  /// Throws StructuralError naming the source if any column is absent.
  void require_columns(const std::vector<std::string>& names) const;

  const std::string& cell(std::size_t row, std::size_t col) const { return rows_[row][col]; }
  double number(std::size_t row, std::size_t col) const;
  std::optional<double> optional_number(std::size_t row, std::size_t col) const;
  long long integer(std::size_t row, std::size_t col) const;

  const std::string& source() const { return source_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::string source_;
};

Table parse(std::string_view text, std::string source = "<memory>");
Table read_file(const std::filesystem::path& path);

std::vector<std::string> split_line(std::string_view line);

/// Writes one CSV row, quoting fields that need it.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace atlas::csv
