// SPDX-License-Identifier: Apache-2.0

#include "polykan/tensor.hpp"

#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "polykan/errors.hpp"

namespace polykan {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("matrix data length " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

CoeffTensor::CoeffTensor(std::size_t d_in, std::size_t d_out, std::size_t features, CoeffLayout layout)
    : CoeffTensor(d_in, d_out, features, layout, std::vector<float>(d_in * d_out * features, 0.0f)) {}

CoeffTensor::CoeffTensor(std::size_t d_in, std::size_t d_out, std::size_t features, CoeffLayout layout,
                         std::vector<float> data)
    : d_in_(d_in), d_out_(d_out), features_(features), layout_(layout), data_(std::move(data)) {
  if (features_ == 0) throw std::invalid_argument("coefficient tensor needs at least one feature");
  if (data_.size() != d_in_ * d_out_ * features_) {
    throw std::invalid_argument("coefficient data length does not match D_in*D_out*features");
  }
}

CoeffTensor reorder_to_doj(const CoeffTensor& c) {
  if (c.layout() != CoeffLayout::JOD) {
    throw std::invalid_argument("reorder_to_doj expects a JOD tensor");
  }
  const std::size_t din = c.d_in();
  const std::size_t dout = c.d_out();
  const std::size_t f = c.features();
  CoeffTensor out(din, dout, f, CoeffLayout::DOJ);
  const auto src = c.data();
  auto dst = out.data();
  for (std::size_t j = 0; j < din; ++j) {
    for (std::size_t o = 0; o < dout; ++o) {
      const float* s = src.data() + jod_index(j, o, 0, dout, f);
      for (std::size_t k = 0; k < f; ++k) {
        dst[doj_index(k, o, j, dout, din)] = s[k];
      }
    }
  }
  return out;
}

CoeffTensor reorder_to_jod(const CoeffTensor& c) {
  if (c.layout() != CoeffLayout::DOJ) {
    throw std::invalid_argument("reorder_to_jod expects a DOJ tensor");
  }
  const std::size_t din = c.d_in();
  const std::size_t dout = c.d_out();
  const std::size_t f = c.features();
  CoeffTensor out(din, dout, f, CoeffLayout::JOD);
  const auto src = c.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < f; ++k) {
    for (std::size_t o = 0; o < dout; ++o) {
      const float* s = src.data() + doj_index(k, o, 0, dout, din);
      for (std::size_t j = 0; j < din; ++j) {
        dst[jod_index(j, o, k, dout, f)] = s[j];
      }
    }
  }
  return out;
}

std::vector<std::uint8_t> serialize_coeffs(const CoeffTensor& c) {
  detail::ByteWriter w;
  w.magic("PKCK");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.layout()));
  w.u32(static_cast<std::uint32_t>(c.d_in()));
  w.u32(static_cast<std::uint32_t>(c.d_out()));
  w.u32(static_cast<std::uint32_t>(c.degree()));
  w.f32s(c.data());
  return w.take();
}

CoeffTensor deserialize_coeffs(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PKCK");
  r.expect_magic("PKCK");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw IoError("PKCK: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t layout = r.u32();
  if (layout > static_cast<std::uint32_t>(CoeffLayout::DOJ)) {
    throw IoError("PKCK: invalid layout tag " + std::to_string(layout));
  }
  const std::size_t din = r.u32();
  const std::size_t dout = r.u32();
  const std::size_t features = static_cast<std::size_t>(r.u32()) + 1;
  const std::size_t count = din * dout * features;
  if (count * 4 + kCheckpointHeaderBytes != bytes.size()) {
    throw IoError("PKCK: payload length does not match header");
  }
  auto data = r.f32s(count);
  r.expect_end();
  return CoeffTensor(din, dout, features, static_cast<CoeffLayout>(layout), std::move(data));
}

void write_checkpoint(const CoeffTensor& c, const std::filesystem::path& path) {
  detail::write_file(path, serialize_coeffs(c));
}

CoeffTensor read_checkpoint(const std::filesystem::path& path) {
  return deserialize_coeffs(detail::read_file(path));
}

}  // namespace polykan
