#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "assign/errors.hpp"

namespace assign {

// Formats with 17 significant digits so that parse(format(x)) == x exactly.
// Infinities are written as "inf"/"-inf"; they mark inactive constraint rows.
inline std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                                 std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

inline double parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    fail("bad_number", "cannot parse '" + std::string(s) + "' as a number");
  return v;
}

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

// Splits one CSV line on commas. No quoting: the formats here never need it.
std::vector<std::string_view> split_csv_line(std::string_view line);

// Splits file content into lines, dropping a trailing empty line.
std::vector<std::string_view> split_lines(std::string_view text);

// CRC-64/ECMA-182, polynomial 0x42F0E1EBA9EA3693, used for shard checksums
// and checkpoint trailers.
uint64_t crc64(const void* data, std::size_t len, uint64_t crc = 0);

std::string to_hex16(uint64_t v);

}  // namespace assign
