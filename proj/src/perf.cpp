// SPDX-License-Identifier: Apache-2.0

#include "polykan/perf.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "polykan/errors.hpp"

namespace polykan {

void validate(const LayerConfig& c) {
  if (c.batch == 0 || c.d_in == 0 || c.d_out == 0) throw std::invalid_argument("layer config dims must be positive");
  if (c.lambda != 4 && c.lambda != 8) {
    throw std::invalid_argument("lambda must be 4 or 8 bytes, got " + std::to_string(c.lambda));
  }
}

std::vector<LayerConfig> benchmark_configs(std::uint64_t lambda) {
  return {{128, 40, 256, 8, lambda}, {64, 256, 512, 15, lambda}, {32, 512, 1024, 24, lambda}};
}

std::vector<LayerConfig> parse_configs(std::istream& in) {
  std::vector<LayerConfig> out;
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;

    std::vector<std::uint64_t> fields;
    bool numeric = true;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
      const auto b = field.find_first_not_of(" \t\r");
      const auto e = field.find_last_not_of(" \t\r");
      std::uint64_t v = 0;
      if (b == std::string::npos) {
        numeric = false;
        break;
      }
      const auto [ptr, ec] = std::from_chars(field.data() + b, field.data() + e + 1, v);
      if (ec != std::errc() || ptr != field.data() + e + 1) {
        numeric = false;
        break;
      }
      fields.push_back(v);
    }
    if (!numeric && first) {
      first = false;
      continue;
    }
    first = false;
    if (!numeric || fields.size() < 4 || fields.size() > 5) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected B,d_in,d_out,degree[,lambda]");
    }
    LayerConfig c{fields[0], fields[1], fields[2], fields[3], fields.size() == 5 ? fields[4] : 4};
    try {
      validate(c);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(c);
  }
  if (out.empty()) throw std::invalid_argument("config file lists no configurations");
  return out;
}

std::vector<LayerConfig> parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  return parse_configs(in);
}

std::string_view to_string(Regime r) { return r == Regime::MemoryBound ? "memory-bound" : "compute-bound"; }

RooflineReport roofline(const LayerConfig& c, double ridge) {
  validate(c);
  const std::uint64_t b = c.batch, n = c.d_in, m = c.d_out, d = c.degree;
  const std::uint64_t flops = 2 * b * n * (d + (d + 1) * m);
  const std::uint64_t bytes = c.lambda * (b * n + b * m + 2 * b * n * (d + 1) + n * m * (d + 1));
  const double intensity = static_cast<double>(flops) / static_cast<double>(bytes);
  return {c, flops, bytes, intensity, ridge, intensity < ridge ? Regime::MemoryBound : Regime::ComputeBound};
}

TwoStageReport two_stage_benefit(const LayerConfig& c, const TileSchedule& sched, const ReductionCosts& costs) {
  validate(c);
  if (!(costs.atomic > 0.0) || !(costs.read > 0.0) || !(costs.write > 0.0)) {
    throw std::invalid_argument("reduction costs must be positive");
  }
  const std::uint64_t g_x = (c.d_in + sched.tile_in() - 1) / sched.tile_in();
  const double gx = static_cast<double>(g_x);
  const double margin = gx * costs.atomic - (gx * (costs.read + costs.write) + costs.write);
  return {margin > 0.0, margin, g_x, c.lambda * c.batch * c.d_out * g_x};
}

std::string roofline_json(const std::vector<RooflineReport>& reports, int indent) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({
        {"B", r.config.batch},
        {"d_in", r.config.d_in},
        {"d_out", r.config.d_out},
        {"degree", r.config.degree},
        {"lambda", r.config.lambda},
        {"flops", r.flops},
        {"bytes", r.bytes},
        {"intensity", r.intensity},
        {"ridge", r.ridge},
        {"regime", std::string(to_string(r.regime))},
    });
  }
  return arr.dump(indent);
}

}  // namespace polykan
