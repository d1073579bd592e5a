#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace textpsy::io {

std::string read_file(const std::filesystem::path& path);

// Writes via a sibling temporary file and rename, creating parent directories.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// 9 significant digits, the precision used by every CSV artifact.
std::string format_real(double value);

std::string csv_escape(std::string_view field);

std::string csv_row(const std::vector<std::string>& fields);

// Minimal RFC 4180 reader: quoted fields, doubled quotes, no embedded newlines.
std::vector<std::string> csv_split(std::string_view line);

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path);

}  // namespace textpsy::io
