// SPDX-License-Identifier: Apache-2.0

#include "polykan/lut.hpp"

#include <algorithm>
#include <numbers>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"
#include "polykan/errors.hpp"

namespace polykan {
namespace {

void check_size(std::size_t size) {
  if (size < 2) {
    throw std::invalid_argument("lut_size must be ≥ 2, got " + std::to_string(size));
  }
}

double grid_point(std::size_t i, double step) {
  return std::min(1.0, -1.0 + static_cast<double>(i) * step);
}

// max |H_k''| on [-1, 1] from H_k'' = 4k(k-1) H_{k-2}, sampled densely. The
// sampled maximum is padded by half a spacing times the sampled max of
// |H_k'''| = 8k(k-1)(k-2)|H_{k-3}|, then by 1%.
std::vector<double> hermite_second_derivative_bound(int degree) {
  constexpr std::size_t kSamples = 20001;
  const double spacing = 2.0 / static_cast<double>(kSamples - 1);
  const std::size_t f = feature_count(BasisKind::Hermite, degree);
  std::vector<double> m2(f, 0.0);
  std::vector<double> m3(f, 0.0);
  std::vector<double> h(f);
  for (std::size_t s = 0; s < kSamples; ++s) {
    eval_basis_into(BasisKind::Hermite, degree, grid_point(s, spacing), h);
    for (std::size_t k = 2; k < f; ++k) {
      const double kk = static_cast<double>(k);
      m2[k] = std::max(m2[k], 4.0 * kk * (kk - 1.0) * std::abs(h[k - 2]));
      if (k >= 3) {
        m3[k] = std::max(m3[k], 8.0 * kk * (kk - 1.0) * (kk - 2.0) * std::abs(h[k - 3]));
      }
    }
  }
  for (std::size_t k = 0; k < f; ++k) {
    m2[k] = 1.01 * (m2[k] + 0.5 * spacing * m3[k]);
  }
  return m2;
}

}  // namespace

LutTable LutTable::build(BasisKind kind, int degree, std::size_t size) {
  check_size(size);
  const std::size_t f = feature_count(kind, degree);
  const double step = 2.0 / static_cast<double>(size - 1);

  std::vector<float> values(f * size);
  std::vector<double> sample(f);
  for (std::size_t i = 0; i < size; ++i) {
    eval_basis_into(kind, degree, grid_point(i, step), sample);
    for (std::size_t k = 0; k < f; ++k) {
      values[k * size + i] = static_cast<float>(sample[k]);
    }
  }

  std::vector<float> slopes(f * (size - 1));
  for (std::size_t k = 0; k < f; ++k) {
    const float* row = values.data() + k * size;
    for (std::size_t i = 0; i + 1 < size; ++i) {
      const double diff = static_cast<double>(row[i + 1]) - static_cast<double>(row[i]);
      slopes[k * (size - 1) + i] = static_cast<float>(diff / step);
    }
  }
  return from_parts(kind, degree, size, std::move(values), std::move(slopes));
}

LutTable LutTable::from_parts(BasisKind kind, int degree, std::size_t size,
                              std::vector<float> values, std::vector<float> slopes) {
  check_size(size);
  const std::size_t f = feature_count(kind, degree);
  if (values.size() != f * size || slopes.size() != f * (size - 1)) {
    throw std::invalid_argument("LUT arrays do not match (features, size)");
  }
  LutTable t;
  t.kind_ = kind;
  t.degree_ = degree;
  t.features_ = f;
  t.size_ = size;
  t.step_ = 2.0 / static_cast<double>(size - 1);
  t.values_ = std::move(values);
  t.slopes_ = std::move(slopes);
  return t;
}

LutTable lut_build(BasisKind kind, int degree, std::size_t lut_size) {
  return LutTable::build(kind, degree, lut_size);
}

std::vector<double> lut_interp(const LutTable& table, double x) {
  const LutCell cell = table.locate(x);
  std::vector<double> out(table.features());
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double left = table.value(k, cell.index);
    const double right = table.value(k, cell.index + 1);
    out[k] = left * (1.0 - cell.frac) + right * cell.frac;
  }
  return out;
}

LutSample lut_interp_with_slope(const LutTable& table, double x) {
  const LutCell cell = table.locate(x);
  LutSample s;
  s.values = lut_interp(table, x);
  s.slopes.resize(table.features());
  for (std::size_t k = 0; k < s.slopes.size(); ++k) {
    s.slopes[k] = table.slope(k, cell.index);
  }
  return s;
}

std::vector<double> lut_max_error_bound(const LutTable& table) {
  const std::size_t f = table.features();
  std::vector<double> max_second(f, 0.0);
  switch (table.kind()) {
    case BasisKind::Chebyshev:
      // |T_k''| peaks at x = +-1 with value k^2 (k^2 - 1) / 3.
      for (std::size_t k = 0; k < f; ++k) {
        const double k2 = static_cast<double>(k * k);
        max_second[k] = k2 * (k2 - 1.0) / 3.0;
      }
      break;
    case BasisKind::Legendre:
      // |P_k''| peaks at x = 1 with value (k-1) k (k+1) (k+2) / 8.
      for (std::size_t k = 0; k < f; ++k) {
        const double kk = static_cast<double>(k);
        max_second[k] = (kk - 1.0) * kk * (kk + 1.0) * (kk + 2.0) / 8.0;
      }
      max_second[0] = 0.0;
      break;
    case BasisKind::Fourier:
      for (std::size_t k = 1; k < f; ++k) {
        const double w = std::numbers::pi * static_cast<double>((k + 1) / 2);
        max_second[k] = w * w;
      }
      break;
    case BasisKind::Hermite:
      max_second = hermite_second_derivative_bound(table.degree());
      break;
  }
  const double h2 = table.step() * table.step() / 8.0;
  for (auto& m : max_second) m = std::max(0.0, m) * h2;
  return max_second;
}

std::vector<double> lut_storage_error_bound(const LutTable& table) {
  constexpr double kHalfUlpF32 = 0x1p-24;
  constexpr double kArithmetic = 0x1p-50;
  std::vector<double> out(table.features());
  for (std::size_t k = 0; k < out.size(); ++k) {
    double peak = 0.0;
    for (float v : table.value_row(k)) peak = std::max(peak, std::abs(static_cast<double>(v)));
    out[k] = (kHalfUlpF32 + kArithmetic) * peak;
  }
  return out;
}

std::vector<std::uint8_t> serialize_lut(const LutTable& table) {
  detail::ByteWriter w;
  w.magic("PKLT");
  w.u32(kLutFormatVersion);
  w.u8(static_cast<std::uint8_t>(table.kind()));
  w.u32(static_cast<std::uint32_t>(table.degree()));
  w.u32(static_cast<std::uint32_t>(table.size()));
  w.f32s(table.values());
  w.f32s(table.slopes());
  return w.take();
}

LutTable deserialize_lut(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "PKLT");
  r.expect_magic("PKLT");
  const std::uint32_t version = r.u32();
  if (version != kLutFormatVersion) {
    throw IoError("PKLT: unsupported format version " + std::to_string(version));
  }
  BasisKind kind{};
  try {
    kind = basis_kind_from_tag(r.u8());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("PKLT: ") + e.what());
  }
  const std::uint32_t degree = r.u32();
  const std::uint32_t size = r.u32();
  if (size < 2 || degree > (1u << 20)) throw IoError("PKLT: invalid header");
  const std::size_t f = feature_count(kind, static_cast<int>(degree));
  auto values = r.f32s(f * size);
  auto slopes = r.f32s(f * (size - 1));
  r.expect_end();
  return LutTable::from_parts(kind, static_cast<int>(degree), size, std::move(values), std::move(slopes));
}

void write_lut(const LutTable& table, const std::filesystem::path& path) {
  detail::write_file(path, serialize_lut(table));
}

LutTable read_lut(const std::filesystem::path& path) {
  return deserialize_lut(detail::read_file(path));
}

}  // namespace polykan
