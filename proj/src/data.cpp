// SPDX-License-Identifier: Apache-2.0

#include "polykan/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "polykan/errors.hpp"
#include "polykan/rng.hpp"

namespace polykan {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_number(std::string_view field, float& out) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), out);
  return ec == std::errc() && ptr == field.data() + field.size() && std::isfinite(out);
}

std::string join_lines(const std::vector<std::size_t>& lines) {
  std::ostringstream os;
  for (std::size_t i = 0; i < lines.size() && i < 20; ++i) os << (i ? ", " : "") << lines[i];
  if (lines.size() > 20) os << ", ...";
  return os.str();
}

}  // namespace

Dataset parse_csv_dataset(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::size_t columns = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      columns = split(line).size();
      break;
    }
  }
  if (columns < 2) throw DataError("CSV needs a header with at least one feature and a target column", {line_no});

  std::vector<float> features;
  std::vector<float> targets;
  std::vector<std::size_t> bad;
  std::vector<float> row(columns);
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    bool ok = fields.size() == columns;
    for (std::size_t c = 0; ok && c < columns; ++c) ok = parse_number(fields[c], row[c]);
    if (!ok) {
      bad.push_back(line_no);
      continue;
    }
    features.insert(features.end(), row.begin(), row.end() - 1);
    targets.push_back(row.back());
  }
  if (!bad.empty()) {
    throw DataError("non-numeric or malformed CSV rows at line(s) " + join_lines(bad), bad);
  }
  if (targets.empty()) throw DataError("CSV has no data rows", {});
  const std::size_t n = targets.size();
  return {Matrix(n, columns - 1, std::move(features)), Matrix(n, 1, std::move(targets))};
}

Dataset load_csv_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return parse_csv_dataset(in);
}

std::vector<std::string> synthetic_dataset_names() { return {"cheb2", "sincos"}; }

Dataset synthetic_dataset(std::string_view name, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xDA7A));
  if (name == "cheb2") {
    constexpr std::size_t n = 256;
    Dataset d{Matrix(n, 1), Matrix(n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
      const float x = static_cast<float>(rng.uniform(-2.0, 2.0));
      const double t = std::tanh(static_cast<double>(x));
      d.features(i, 0) = x;
      d.targets(i, 0) = static_cast<float>(2.0 * t * t - 1.0);
    }
    return d;
  }
  if (name == "sincos") {
    constexpr std::size_t n = 512;
    Dataset d{Matrix(n, 2), Matrix(n, 1)};
    for (std::size_t i = 0; i < n; ++i) {
      const float x1 = static_cast<float>(rng.uniform(-1.0, 1.0));
      const float x2 = static_cast<float>(rng.uniform(-1.0, 1.0));
      d.features(i, 0) = x1;
      d.features(i, 1) = x2;
      d.targets(i, 0) = static_cast<float>(std::sin(std::numbers::pi * x1) + static_cast<double>(x2) * x2);
    }
    return d;
  }
  throw std::invalid_argument("unknown synthetic dataset '" + std::string(name) + "'");
}

}  // namespace polykan
