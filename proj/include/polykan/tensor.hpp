// SPDX-License-Identifier: Apache-2.0
//
// Dense containers for layer inputs/outputs and learnable coefficients.
//
// Coefficients come in two physical layouts:
//   JOD  [input][output][feature]  the conventional orientation
//   DOJ  [feature][output][input]  reordered so the input index is unit-stride
// Conversion is an explicit copy made once at layer construction.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace polykan {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }
  std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

enum class CoeffLayout : std::uint32_t { JOD = 0, DOJ = 1 };

constexpr std::size_t jod_index(std::size_t j, std::size_t o, std::size_t k, std::size_t d_out,
                                std::size_t features) noexcept {
  return (j * d_out + o) * features + k;
}

constexpr std::size_t doj_index(std::size_t k, std::size_t o, std::size_t j, std::size_t d_out,
                                std::size_t d_in) noexcept {
  return (k * d_out + o) * d_in + j;
}

class CoeffTensor {
 public:
  CoeffTensor() = default;
  /// Zero-filled. `features` is the innermost extent of the JOD layout
  /// (degree+1 for the polynomial families, 2*degree+1 for Fourier).
  CoeffTensor(std::size_t d_in, std::size_t d_out, std::size_t features, CoeffLayout layout);
  CoeffTensor(std::size_t d_in, std::size_t d_out, std::size_t features, CoeffLayout layout,
              std::vector<float> data);

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  std::size_t features() const noexcept { return features_; }
  /// Highest feature index, features() - 1.
  std::size_t degree() const noexcept { return features_ - 1; }
  CoeffLayout layout() const noexcept { return layout_; }

  std::size_t size() const noexcept { return data_.size(); }
  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  /// Flat offset of (input j, output o, feature k) in the current layout.
  std::size_t index(std::size_t j, std::size_t o, std::size_t k) const noexcept {
    return layout_ == CoeffLayout::JOD ? jod_index(j, o, k, d_out_, features_)
                                       : doj_index(k, o, j, d_out_, d_in_);
  }
  float& at(std::size_t j, std::size_t o, std::size_t k) noexcept { return data_[index(j, o, k)]; }
  float at(std::size_t j, std::size_t o, std::size_t k) const noexcept { return data_[index(j, o, k)]; }

  friend bool operator==(const CoeffTensor&, const CoeffTensor&) = default;

 private:
  std::size_t d_in_ = 0;
  std::size_t d_out_ = 0;
  std::size_t features_ = 0;
  CoeffLayout layout_ = CoeffLayout::JOD;
  std::vector<float> data_;
};

/// Throws std::invalid_argument unless the input is in JOD layout.
CoeffTensor reorder_to_doj(const CoeffTensor& c);
/// Throws std::invalid_argument unless the input is in DOJ layout.
CoeffTensor reorder_to_jod(const CoeffTensor& c);

// Checkpoint format "PKCK": magic, then u32 version, layout tag, D_in, D_out,
// degree (= features - 1), then the payload as little-endian float32 in the
// tagged layout.
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 4 + 5 * 4;

std::vector<std::uint8_t> serialize_coeffs(const CoeffTensor& c);
CoeffTensor deserialize_coeffs(std::span<const std::uint8_t> bytes);
void write_checkpoint(const CoeffTensor& c, const std::filesystem::path& path);
CoeffTensor read_checkpoint(const std::filesystem::path& path);

}  // namespace polykan
