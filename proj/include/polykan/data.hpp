// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polykan/tensor.hpp"

namespace polykan {

/// Features plus a single target column (regression value or class label).
struct Dataset {
  Matrix features;
  Matrix targets;

  std::size_t size() const noexcept { return features.rows(); }
};

/// CSV schema violation; carries the offending 1-based line numbers.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::vector<std::size_t> lines)
      : std::runtime_error(what), lines_(std::move(lines)) {}
  const std::vector<std::size_t>& lines() const noexcept { return lines_; }

 private:
  std::vector<std::size_t> lines_;
};

/// Header line, then all-numeric rows; the last column is the target.
Dataset parse_csv_dataset(std::istream& in);
Dataset load_csv_dataset(const std::filesystem::path& path);

/// Built-in generators:
///   cheb2   x ~ U[-2, 2], y = T_2(tanh x)             (256 rows, 1 feature)
///   sincos  x ~ U[-1, 1]^2, y = sin(pi x1) + x2^2     (512 rows, 2 features)
Dataset synthetic_dataset(std::string_view name, std::uint64_t seed = 0);
std::vector<std::string> synthetic_dataset_names();

}  // namespace polykan
