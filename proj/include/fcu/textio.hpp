#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace fcu {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

/// Strict parse of a whole field; returns false on any trailing garbage.
bool parse_double(std::string_view text, double& out);

std::vector<std::string_view> split_csv_line(std::string_view line);

std::string read_file(const std::filesystem::path& path);

/// Writes via a temporary sibling and rename, so readers never see partial files.
void write_file(const std::filesystem::path& path, std::string_view content);

/// SplitMix64 mixing step; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

} // namespace fcu
