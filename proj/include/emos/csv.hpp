#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace emos::csv {

// Splits one line on commas. Fields are not quoted anywhere in our formats.
std::vector<std::string> split(std::string_view line, char sep = ',');

// Shortest decimal representation that round-trips exactly.
std::string format_double(double v);

// Strict full-field parse; throws DataError naming `what` on failure.
double parse_double(std::string_view field, std::string_view what);
long long parse_int(std::string_view field, std::string_view what);

std::vector<std::string> read_lines(const std::filesystem::path& path);

// Writes through a temporary sibling and renames, so readers never see a
// partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

std::string trim(std::string_view s);

} // namespace emos::csv
