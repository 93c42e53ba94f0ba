// SPDX-License-Identifier: Apache-2.0
//
// Roofline model of a KAN layer, the two-stage reduction cost test, and the
// kernel micro-benchmark harness.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "polykan/kernels.hpp"
#include "polykan/lut.hpp"

namespace polykan {

struct LayerConfig {
  std::uint64_t batch = 1;
  std::uint64_t d_in = 1;
  std::uint64_t d_out = 1;
  std::uint64_t degree = 0;
  std::uint64_t lambda = 4;  // bytes per element
};

/// Throws std::invalid_argument for zero dimensions or lambda outside {4, 8}.
void validate(const LayerConfig& c);

/// The three benchmark shapes (128,40,256,8), (64,256,512,15), (32,512,1024,24).
std::vector<LayerConfig> benchmark_configs(std::uint64_t lambda = 4);

/// Lines of `B,d_in,d_out,degree[,lambda]`; blank lines, `#` comments, and a
/// leading non-numeric header are skipped.
std::vector<LayerConfig> parse_config_file(const std::filesystem::path& path);
std::vector<LayerConfig> parse_configs(std::istream& in);

enum class Regime { MemoryBound, ComputeBound };
std::string_view to_string(Regime r);

/// Ridge intensity used when none is supplied (FLOP per byte).
inline constexpr double kDefaultRidgeIntensity = 10.0;

struct RooflineReport {
  LayerConfig config;
  std::uint64_t flops;  // T = 2 B D_in (d + (d+1) D_out)
  std::uint64_t bytes;  // S = lambda [B D_in + B D_out + 2 B D_in (d+1) + D_in D_out (d+1)]
  double intensity;     // T / S
  double ridge;
  Regime regime;        // MemoryBound iff intensity < ridge
};

RooflineReport roofline(const LayerConfig& c, double ridge = kDefaultRidgeIntensity);

/// Relative costs of an atomic update, a read, and a write.
struct ReductionCosts {
  double atomic = 1.0;
  double read = 1.0;
  double write = 1.0;
};

struct TwoStageReport {
  bool beneficial;
  double margin;  // g_x c_a - (g_x (c_r + c_w) + c_w)
  std::uint64_t g_x;
  std::uint64_t partial_bytes;  // lambda B D_out g_x
};

/// Throws std::invalid_argument for non-positive costs.
TwoStageReport two_stage_benefit(const LayerConfig& c, const TileSchedule& sched, const ReductionCosts& costs);

std::string roofline_json(const std::vector<RooflineReport>& reports, int indent = 2);

// --- Benchmarks ---------------------------------------------------------------

// Versions in optimization order:
//   reference-trig        unfused, cos(n arccos x), JOD
//   reference-recurrence  unfused, three-term recurrence, JOD
//   fused-exact           tiled two-stage kernels, recurrence, JOD
//   fused-lut             tiled two-stage kernels, LUT, JOD
//   fused-lut+reorder     tiled two-stage kernels, LUT, DOJ
enum class KernelVersion { ReferenceTrig, ReferenceRecurrence, FusedExact, FusedLut, FusedLutReorder };

std::string_view to_string(KernelVersion v);
KernelVersion parse_kernel_version(std::string_view name);
std::vector<KernelVersion> all_kernel_versions();
/// "all" or a comma-separated list of version tags.
std::vector<KernelVersion> parse_kernel_versions(std::string_view list);

struct BenchOptions {
  std::size_t reps = 20;
  std::size_t warmups = 5;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  TileParams tiles{};
  std::size_t lut_size = kDefaultLutSize;
};

struct BenchResult {
  LayerConfig config;
  KernelVersion version;
  unsigned workers;
  std::size_t reps;
  double fwd_ms;         // median forward time
  double bwd_ms;         // median backward time
  double total_s;        // sum of forward + backward over the timed reps
  double samples_per_s;  // B * reps / total_s
};

/// Chebyshev layer inputs drawn from `seed`: x ~ U(-2, 2), JOD coefficients
/// ~ U(-1, 1) / sqrt(D_in (d+1)), dY ~ U(-1, 1).
struct BenchInputs {
  Matrix x;
  CoeffTensor coeff;
  Matrix dy;
};
BenchInputs make_bench_inputs(const LayerConfig& c, std::uint64_t seed);

/// Times every (config, version) pair in order.
std::vector<BenchResult> run_bench(const std::vector<LayerConfig>& configs, const std::vector<KernelVersion>& versions,
                                   const BenchOptions& opts = {});

/// Header: B,d_in,d_out,degree,lambda,version,workers,fwd_ms,bwd_ms,samples_per_s
void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results);

}  // namespace polykan
