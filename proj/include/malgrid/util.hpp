#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace malgrid {

namespace fs = std::filesystem;

std::vector<std::uint8_t> read_file(const fs::path& path);
std::string read_text(const fs::path& path);
void write_file(const fs::path& path, std::span<const std::uint8_t> bytes);
void write_text(const fs::path& path, std::string_view text);

/// Lowercase hex SHA-256 of a byte buffer.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Splits one CSV line on commas. Fields are never quoted in our formats.
std::vector<std::string> split_csv_line(std::string_view line);
/// Splits text into lines, dropping '\r' and a trailing empty line.
std::vector<std::string> split_lines(std::string_view text);

/// Runs body(i) for i in [0, n) on up to hardware_concurrency threads.
/// Each index is processed exactly once; exceptions are rethrown in the caller.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

/// Current UTC time as ISO-8601 with seconds precision.
std::string utc_timestamp();

}  // namespace malgrid
