// SPDX-License-Identifier: Apache-2.0
//
// Little-endian byte encoding shared by the LUT and checkpoint formats.

#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace polykan::detail {

class ByteWriter {
 public:
  void magic(std::string_view tag);
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f32s(std::span<const float> vs);

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string_view what)
      : bytes_(bytes), what_(what) {}

  void expect_magic(std::string_view tag);
  std::uint8_t u8();
  std::uint32_t u32();
  float f32() { return std::bit_cast<float>(u32()); }
  std::vector<float> f32s(std::size_t count);
  void expect_end() const;

 private:
  void need(std::size_t n) const;

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string_view what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace polykan::detail
