#pragma once

// Text formatting shared by the CSV and config writers.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace folilab {

/// Shortest round-trip-safe rendering with 17 significant digits.
std::string format_double(double v);

/// Strict parse: the whole string must be a finite or infinite decimal number.
double parse_double(std::string_view text);
long long parse_integer(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);
/// Writes the whole file, creating parent directories.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace folilab
