// Copyright 2026 The DPMS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "dpms/core_data.hpp"
#include "dpms/error.hpp"

namespace dpms {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// Splits one line on commas, honouring double-quoted fields.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

inline std::optional<double> parse_double(const std::string& cell) {
  double v = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (begin != end && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace detail

// Header row plus numeric rows, '.' as decimal separator. Row numbers in
// errors count data rows from 1.
inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw DataError("CSV input is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  table.header = detail::split_csv_line(line);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    ++row;
    const auto fields = detail::split_csv_line(line);
    if (fields.size() != table.header.size()) {
      throw DataError("row " + std::to_string(row) + ": expected " +
                      std::to_string(table.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> values;
    values.reserve(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const auto v = detail::parse_double(fields[j]);
      if (!v) {
        throw DataError("row " + std::to_string(row) + ", column '" +
                        table.header[j] + "': non-numeric value '" + fields[j] +
                        "'");
      }
      values.push_back(*v);
    }
    table.rows.push_back(std::move(values));
  }
  if (table.rows.empty()) throw DataError("CSV input has no data rows");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read_csv(in);
}

struct IngestOptions {
  std::string response;
  bool include_intercept = true;
  StandardizePolicy policy = StandardizePolicy::kNone;
  std::optional<double> r;
  // Public ranges keyed by column name, used by kRescale.
  std::vector<std::pair<std::string, Range>> ranges;
};

inline constexpr const char* kInterceptName = "(intercept)";

// Splits a table into covariates and response, then bounds-checks (and
// optionally standardizes) it into a Dataset.
inline Dataset to_dataset(const CsvTable& table, const IngestOptions& opts) {
  std::optional<std::size_t> response;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (table.header[j] == opts.response) response = j;
  }
  if (!response) throw ConfigError("response column '" + opts.response + "' not found");
  const std::size_t p = table.header.size() - 1;
  if (p == 0 && !opts.include_intercept) throw ConfigError("no covariate columns");

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Matrix x(n, static_cast<Eigen::Index>(p));
  Vector y(n);
  std::vector<std::string> names;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j != *response) names.push_back(table.header[j]);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j == *response) {
        y(i) = row[j];
      } else {
        x(i, col++) = row[j];
      }
    }
  }

  StandardizeOptions sopts;
  sopts.r = opts.r;
  if (opts.policy == StandardizePolicy::kRescale) {
    const auto lookup = [&](const std::string& name) -> Range {
      for (const auto& [key, range] : opts.ranges) {
        if (key == name) return range;
      }
      throw ConfigError("rescale needs a range for column '" + name + "'");
    };
    for (const auto& name : names) sopts.x_ranges.push_back(lookup(name));
    sopts.y_range = lookup(opts.response);
  }
  Dataset raw = standardize(std::move(x), std::move(y), opts.policy, sopts);
  if (!opts.include_intercept) {
    return Dataset(raw.x(), raw.y(), raw.r(), names, raw.r_data_dependent());
  }
  names.insert(names.begin(), kInterceptName);
  return Dataset(with_intercept(raw.x()), raw.y(), raw.r(), names,
                 raw.r_data_dependent());
}

}  // namespace dpms
