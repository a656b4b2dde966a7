#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace loocmi::io {

/// 17 significant digits, '.' decimal point regardless of locale.
std::string format_double(double value);

/// Locale-independent parse of the whole field. Throws ParseError.
double parse_double(std::string_view field, const std::string& file, std::size_t line);
long long parse_int(std::string_view field, const std::string& file, std::size_t line);

std::vector<std::string_view> split(std::string_view line, char sep);
std::string_view trim(std::string_view s);

std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes `content` only through a temporary file + rename.
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace loocmi::io
