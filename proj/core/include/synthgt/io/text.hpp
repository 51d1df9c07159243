// Copyright 2026 The synthgt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace synthgt::io {

// Shortest decimal form that round-trips to the same double; NaN -> "".
std::string format_double(double v);
// Parses a CSV field; empty or "nan" -> NaN. Throws IoError on garbage.
double parse_double(std::string_view field);

std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::string config_hash;  // from a leading "# synthgt config_hash=..." line, if any
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws IoError if absent
};

CsvTable read_csv(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
// Writes to a temporary sibling then renames, so readers never see a torn file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string csv_hash_line(std::string_view config_hash);

}  // namespace synthgt::io
