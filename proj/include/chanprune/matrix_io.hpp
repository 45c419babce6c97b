// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "chanprune/core.hpp"
#include "chanprune/error.hpp"

// GRCM binary layout (all little-endian):
//   offset 0   "GRCM" magic
//   offset 4   format version byte, 0x01
//   offset 5   rows  (uint32)
//   offset 9   cols  (uint32)
//   offset 13  rows*cols IEEE-754 binary64 values, row-major

namespace chanprune {

inline constexpr std::array<char, 4> kGrcmMagic{'G', 'R', 'C', 'M'};
inline constexpr std::uint8_t kGrcmVersion = 0x01;
inline constexpr std::size_t kGrcmHeaderSize = 13;

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(std::string_view in, std::size_t offset, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return v;
}

// Rethrows a non-finite ChannelMatrix complaint with the source named.
inline ChannelMatrix make_checked(std::size_t rows, std::size_t cols,
                                  std::vector<double> values, const std::string& source) {
  try {
    return ChannelMatrix(rows, cols, std::move(values));
  } catch (const ValidationError& e) {
    throw ValidationError(source + ": " + e.what());
  }
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

inline std::string encode_grcm(const ChannelMatrix& m) {
  if (m.rows() > UINT32_MAX || m.cols() > UINT32_MAX) {
    throw ArgumentError("matrix too large for GRCM");
  }
  std::string out(kGrcmMagic.begin(), kGrcmMagic.end());
  out.push_back(static_cast<char>(kGrcmVersion));
  detail::put_le(out, m.rows(), 4);
  detail::put_le(out, m.cols(), 4);
  out.reserve(kGrcmHeaderSize + 8 * m.data().size());
  for (double v : m.data()) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
  return out;
}

inline ChannelMatrix decode_grcm(std::string_view bytes, const std::string& source = "GRCM") {
  if (bytes.size() < kGrcmMagic.size() ||
      !std::equal(kGrcmMagic.begin(), kGrcmMagic.end(), bytes.begin())) {
    throw FormatError(source + ": bad magic, expected \"GRCM\"", 0);
  }
  if (bytes.size() < kGrcmHeaderSize) {
    throw FormatError(source + ": truncated header", bytes.size());
  }
  if (static_cast<std::uint8_t>(bytes[4]) != kGrcmVersion) {
    throw FormatError(source + ": unsupported format version " +
                          std::to_string(static_cast<unsigned char>(bytes[4])),
                      4);
  }
  const std::uint64_t rows = detail::get_le(bytes, 5, 4);
  const std::uint64_t cols = detail::get_le(bytes, 9, 4);
  if (rows == 0) throw FormatError(source + ": zero rows", 5);
  if (cols == 0) throw FormatError(source + ": zero columns", 9);
  const std::uint64_t expected = kGrcmHeaderSize + 8 * rows * cols;
  if (bytes.size() < expected) {
    throw FormatError(source + ": truncated data, expected " + std::to_string(expected) +
                          " bytes, got " + std::to_string(bytes.size()),
                      bytes.size());
  }
  if (bytes.size() > expected) {
    throw FormatError(source + ": trailing bytes after matrix data", expected);
  }
  std::vector<double> values(rows * cols);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = std::bit_cast<double>(detail::get_le(bytes, kGrcmHeaderSize + 8 * i, 8));
  }
  return detail::make_checked(rows, cols, std::move(values), source);
}

/// Headerless CSV: one token row per line, comma-separated decimal floats.
/// Blank lines are skipped.
inline ChannelMatrix decode_csv(std::string_view text, const std::string& source = "CSV") {
  std::vector<double> values;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t line_start = 0;
  while (line_start < text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string_view::npos) line_end = text.size();
    const std::string_view line = text.substr(line_start, line_end - line_start);
    if (!detail::trim(line).empty()) {
      std::size_t field_start = 0;
      std::size_t count = 0;
      while (true) {
        std::size_t comma = line.find(',', field_start);
        const bool last = comma == std::string_view::npos;
        if (last) comma = line.size();
        const std::string_view raw = line.substr(field_start, comma - field_start);
        const std::string_view field = detail::trim(raw);
        const std::size_t offset = line_start + field_start;
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
          throw FormatError(source + ": cannot parse '" + std::string(field) + "' at row " +
                                std::to_string(rows) + ", col " + std::to_string(count),
                            offset);
        }
        if (!std::isfinite(v)) {
          throw ValidationError(source + ": non-finite value at row " + std::to_string(rows) +
                                ", col " + std::to_string(count));
        }
        values.push_back(v);
        ++count;
        if (last) break;
        field_start = comma + 1;
      }
      if (rows == 0) {
        cols = count;
      } else if (count != cols) {
        throw FormatError(source + ": row " + std::to_string(rows) + " has " +
                              std::to_string(count) + " fields, expected " +
                              std::to_string(cols),
                          line_start);
      }
      ++rows;
    }
    line_start = line_end + 1;
  }
  if (rows == 0) throw FormatError(source + ": no data rows", 0);
  return detail::make_checked(rows, cols, std::move(values), source);
}

/// Reads a GRCM or CSV matrix; the format is chosen by the leading magic.
inline ChannelMatrix load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
  if (bytes.size() >= kGrcmMagic.size() &&
      std::equal(kGrcmMagic.begin(), kGrcmMagic.end(), bytes.begin())) {
    return decode_grcm(bytes, path.string());
  }
  return decode_csv(bytes, path.string());
}

/// Writes m as GRCM, truncating any existing file.
inline void save_matrix(const ChannelMatrix& m, const std::filesystem::path& path) {
  if (path.empty()) throw IoError("save_matrix: empty output path");
  const std::string bytes = encode_grcm(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

}  // namespace chanprune
