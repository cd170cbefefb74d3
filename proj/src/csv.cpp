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
#include "atlas/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "atlas/error.hpp"

namespace atlas::csv {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
      was_quoted = true;
    } else if (c == ',') {
      out.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else {
      field.push_back(c);
    }
  }
  out.push_back(was_quoted ? field : trim(field));
  return out;
}

Table::Table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows,
             std::string source)
    : header_(std::move(header)), rows_(std::move(rows)), source_(std::move(source)) {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (!index_.emplace(header_[i], i).second) {
      throw StructuralError(source_ + ": duplicate column '" + header_[i] + "'");
    }
  }
}

bool Table::has_column(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t Table::column(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw StructuralError(source_ + ": missing column '" + std::string(name) + "'");
  }
  return it->second;
}

void Table::require_columns(const std::vector<std::string>& names) const {
  std::string missing;
  for (const auto& n : names) {
    if (!has_column(n)) missing += (missing.empty() ? "" : ", ") + n;
  }
  if (!missing.empty()) throw StructuralError(source_ + ": missing column(s) " + missing);
}

std::optional<double> Table::optional_number(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  if (s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == ".") return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw StructuralError(source_ + ": row " + std::to_string(row + 2) + ", column '" +
                          header_[col] + "': not a number: '" + s + "'");
  }
  return v;
}

double Table::number(std::size_t row, std::size_t col) const {
  auto v = optional_number(row, col);
  if (!v) {
    throw StructuralError(source_ + ": row " + std::to_string(row + 2) + ", column '" +
                          header_[col] + "': missing value");
  }
  return *v;
}

long long Table::integer(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw StructuralError(source_ + ": row " + std::to_string(row + 2) + ", column '" +
                          header_[col] + "': not an integer: '" + s + "'");
  }
  return v;
}

Table parse(std::string_view text, std::string source) {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      if (nl >= text.size()) break;
      continue;
    }
    auto fields = split_line(line);
    if (header.empty()) {
      if (line_no == 1 && fields[0].starts_with("\xEF\xBB\xBF")) fields[0].erase(0, 3);
      header = std::move(fields);
      continue;
    }
    if (fields.size() != header.size()) {
      throw StructuralError(source + ": line " + std::to_string(line_no) + " has " +
                            std::to_string(fields.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    rows.push_back(std::move(fields));
    if (nl >= text.size()) break;
  }
  if (header.empty()) throw StructuralError(source + ": empty CSV (no header row)");
  return Table(std::move(header), std::move(rows), std::move(source));
}

Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.string());
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char c : f) {
        if (c == '"') out << '"';
        out << c;
      }
      out << '"';
    } else {
      out << f;
    }
  }
  out << '\n';
}

}  // namespace atlas::csv
