// SPDX-License-Identifier: Apache-2.0
//
// Offline-built basis lookup tables and online linear interpolation.
//
// A table samples every basis feature on the uniform grid
// x_i = -1 + i * step, step = 2 / (size - 1), i = 0 .. size-1. Samples are
// computed in double precision and stored as 32-bit floats. The per-cell
// slopes (t[i+1] - t[i]) / step are taken from the stored samples, so they are
// the exact derivative of the piecewise-linear surrogate the kernels evaluate.

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "polykan/basis.hpp"

namespace polykan {

inline constexpr std::size_t kDefaultLutSize = 32768;

/// Grid cell containing a query point: interpolate t[index] and t[index+1]
/// with weight `frac` on the right sample.
struct LutCell {
  std::size_t index;
  double frac;
};

class LutTable {
 public:
  /// Builds a table by one recurrence sweep per grid point.
  /// Throws std::invalid_argument for size < 2 or degree < 0.
  static LutTable build(BasisKind kind, int degree, std::size_t size);

  /// Assembles a table from stored arrays (deserialization, test fixtures).
  static LutTable from_parts(BasisKind kind, int degree, std::size_t size,
                             std::vector<float> values, std::vector<float> slopes);

  BasisKind kind() const noexcept { return kind_; }
  int degree() const noexcept { return degree_; }
  std::size_t features() const noexcept { return features_; }
  std::size_t size() const noexcept { return size_; }
  double step() const noexcept { return step_; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<const float> slopes() const noexcept { return slopes_; }
  std::span<const float> value_row(std::size_t k) const noexcept {
    return {values_.data() + k * size_, size_};
  }
  std::span<const float> slope_row(std::size_t k) const noexcept {
    return {slopes_.data() + k * (size_ - 1), size_ - 1};
  }
  float value(std::size_t k, std::size_t i) const noexcept { return values_[k * size_ + i]; }
  float slope(std::size_t k, std::size_t i) const noexcept { return slopes_[k * (size_ - 1) + i]; }

  /// Clamps x to [-1, 1] and locates its cell. Positions within 1e-9 of a
  /// grid node snap onto it, so grid points reproduce stored samples exactly.
  LutCell locate(double x) const noexcept {
    const double xc = std::fmin(1.0, std::fmax(-1.0, x));
    double pos = (xc + 1.0) * 0.5 * static_cast<double>(size_ - 1);
    const double nearest = std::nearbyint(pos);
    if (std::fabs(pos - nearest) < 1e-9) pos = nearest;
    const double last_cell = static_cast<double>(size_ - 2);
    const double cell = std::fmin(std::floor(pos), last_cell);
    return {static_cast<std::size_t>(cell), pos - cell};
  }

 private:
  LutTable() = default;

  BasisKind kind_ = BasisKind::Chebyshev;
  int degree_ = 0;
  std::size_t features_ = 0;
  std::size_t size_ = 0;
  double step_ = 0.0;
  std::vector<float> values_;  // [features x size]
  std::vector<float> slopes_;  // [features x (size-1)]
};

struct LutSample {
  std::vector<double> values;
  std::vector<double> slopes;
};

LutTable lut_build(BasisKind kind, int degree, std::size_t lut_size);

/// values[k][i] (1 - f) + values[k][i+1] f, evaluated in double.
std::vector<double> lut_interp(const LutTable& table, double x);

/// Interpolated values plus the active cell's slope per feature.
LutSample lut_interp_with_slope(const LutTable& table, double x);

/// Interpolation bound step^2/8 * max|B_k''| per feature. Closed forms for
/// Chebyshev, Legendre and Fourier; Hermite falls back to a dense-sampled
/// bound with a safety margin.
std::vector<double> lut_max_error_bound(const LutTable& table);

/// Rounding introduced by 32-bit sample storage: 2^-24 * max|B_k| per feature.
std::vector<double> lut_storage_error_bound(const LutTable& table);

// Binary format "PKLT": magic, u32 version, u8 basis tag, u32 degree,
// u32 size, then values and slopes row-major as little-endian float32.
inline constexpr std::uint32_t kLutFormatVersion = 1;
inline constexpr std::size_t kLutHeaderBytes = 4 + 4 + 1 + 4 + 4;

std::vector<std::uint8_t> serialize_lut(const LutTable& table);
LutTable deserialize_lut(std::span<const std::uint8_t> bytes);
void write_lut(const LutTable& table, const std::filesystem::path& path);
LutTable read_lut(const std::filesystem::path& path);

}  // namespace polykan
