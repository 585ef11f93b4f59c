#include "assign/io_util.hpp"

#include <array>
#include <fstream>
#include <sstream>

namespace assign {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io_error", "cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof())
    fail("io_error", "read failure on " + path.string());
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io_error", "cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail("io_error", "write failure on " + path.string());
}

std::vector<std::string_view> split_csv_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      if (i == text.size() && i == start) break;
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      out.push_back(line);
      start = i + 1;
    }
  }
  return out;
}

namespace {

std::array<uint64_t, 256> make_crc64_table() {
  constexpr uint64_t poly = 0x42F0E1EBA9EA3693ULL;
  std::array<uint64_t, 256> table{};
  for (uint64_t i = 0; i < 256; ++i) {
    uint64_t crc = i << 56;
    for (int bit = 0; bit < 8; ++bit)
      crc = (crc & (1ULL << 63)) ? (crc << 1) ^ poly : crc << 1;
    table[i] = crc;
  }
  return table;
}

}  // namespace

uint64_t crc64(const void* data, std::size_t len, uint64_t crc) {
  static const std::array<uint64_t, 256> table = make_crc64_table();
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i)
    crc = table[((crc >> 56) ^ p[i]) & 0xFF] ^ (crc << 8);
  return crc;
}

std::string to_hex16(uint64_t v) {
  static const char digits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<std::size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace assign
