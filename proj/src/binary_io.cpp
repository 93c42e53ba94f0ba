// SPDX-License-Identifier: Apache-2.0

#include "binary_io.hpp"

#include <fstream>
#include <iterator>
#include <string>

#include "polykan/errors.hpp"

namespace polykan::detail {

void ByteWriter::magic(std::string_view tag) {
  for (char c : tag) bytes_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    bytes_.push_back(static_cast<std::uint8_t>((v >> shift) & 0xFFu));
  }
}

void ByteWriter::f32s(std::span<const float> vs) {
  bytes_.reserve(bytes_.size() + 4 * vs.size());
  for (float v : vs) f32(v);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw IoError(std::string(what_) + ": truncated input");
  }
}

void ByteReader::expect_magic(std::string_view tag) {
  need(tag.size());
  for (char c : tag) {
    if (bytes_[pos_++] != static_cast<std::uint8_t>(c)) {
      throw IoError(std::string(what_) + ": bad magic, expected '" + std::string(tag) + "'");
    }
  }
}

std::uint8_t ByteReader::u8() {
  need(1);
  return bytes_[pos_++];
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(bytes_[pos_++]) << (8 * i);
  }
  return v;
}

std::vector<float> ByteReader::f32s(std::size_t count) {
  need(4 * count);
  std::vector<float> out(count);
  for (auto& v : out) v = f32();
  return out;
}

void ByteReader::expect_end() const {
  if (pos_ != bytes_.size()) {
    throw IoError(std::string(what_) + ": trailing bytes after payload");
  }
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace polykan::detail
