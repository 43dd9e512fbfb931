#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace saifdl {

/// Shortest decimal form that parses back to exactly the same double.
std::string format_double(double value);

/// Strict double parse of the whole string; returns false on any leftover
/// characters, empty input, or out-of-range value.
bool parse_double(std::string_view text, double& out);

/// Strict non-negative integer parse of the whole string.
bool parse_index(std::string_view text, std::int64_t& out);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary file in the same directory plus rename, so readers
/// never observe a truncated file.
void atomic_write_file(const std::filesystem::path& path,
                       std::string_view content);

}  // namespace saifdl
