// SPDX-License-Identifier: Apache-2.0
//
// polykan: build lookup tables, run the self-check suite, benchmark kernel
// versions, and train small KAN networks.
//
// Exit codes: 0 success, 2 usage error, 3 verification failure or diverged
// training, 4 I/O or data-file error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "polykan/data.hpp"
#include "polykan/errors.hpp"
#include "polykan/lut.hpp"
#include "polykan/model.hpp"
#include "polykan/perf.hpp"
#include "polykan/verify.hpp"

namespace {

namespace fs = std::filesystem;
using namespace polykan;

constexpr int kExitUsage = 2;
constexpr int kExitVerify = 3;
constexpr int kExitIo = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct VerifyFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::size_t> parse_arch(const std::string& arch) {
  std::vector<std::size_t> widths;
  std::stringstream ss(arch);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || item.find_first_not_of(" \t", pos) != std::string::npos || v == 0) {
      throw UsageError("--arch: '" + item + "' is not a positive width");
    }
    widths.push_back(v);
  }
  if (widths.size() < 2) throw UsageError("--arch needs at least two widths, e.g. \"1,1\"");
  return widths;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
}

// --- lut-build ----------------------------------------------------------------

struct LutBuildArgs {
  std::string basis = "chebyshev";
  int degree = 8;
  std::size_t size = kDefaultLutSize;
  std::string out;
};

void cmd_lut_build(const LutBuildArgs& a) {
  if (a.size < 2) throw UsageError("lut_size must be ≥ 2, got " + std::to_string(a.size));
  if (a.degree < 0) throw UsageError("--degree must be non-negative");
  BasisKind kind{};
  try {
    kind = parse_basis_kind(a.basis);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const LutTable t = LutTable::build(kind, a.degree, a.size);
  const fs::path out(a.out);
  ensure_parent(out);
  write_lut(t, out);
  std::printf("wrote %s: %s degree %d, %zu features, %zu samples, %ju bytes\n", a.out.c_str(),
              std::string(to_string(kind)).c_str(), a.degree, t.features(), t.size(),
              static_cast<std::uintmax_t>(fs::file_size(out)));
  const auto bound = lut_max_error_bound(t);
  const auto storage = lut_storage_error_bound(t);
  std::printf("%8s %16s %16s\n", "feature", "interp_bound", "storage_bound");
  for (std::size_t k = 0; k < bound.size(); ++k) std::printf("%8zu %16.6e %16.6e\n", k, bound[k], storage[k]);
}

// --- verify -------------------------------------------------------------------

struct VerifyArgs {
  std::string config = "small";
  std::string fault = "none";
  std::uint64_t seed = 0;
  unsigned workers = 1;
};

void cmd_verify(const VerifyArgs& a) {
  VerifyOptions opts;
  try {
    opts.scope = parse_verify_scope(a.config);
    opts.fault = parse_injected_fault(a.fault);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  opts.seed = a.seed;
  opts.workers = a.workers;
  const VerifyReport report = run_verify(opts);
  std::cout << format_report(report);
  if (!report.passed()) {
    std::string names;
    for (const auto& n : report.failures()) names += (names.empty() ? "" : ", ") + n;
    throw VerifyFailure("property violated: " + names);
  }
  std::cout << "all " << report.properties.size() << " properties hold\n";
}

// --- bench --------------------------------------------------------------------

struct BenchArgs {
  std::string configs = "paper";
  std::string versions = "all";
  std::size_t reps = 20;
  std::size_t warmups = 5;
  std::string csv;
  std::string json;
  double imax = kDefaultRidgeIntensity;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  TileParams tiles{};
  std::size_t lut_size = kDefaultLutSize;
};

void warn_ordering(const std::vector<BenchResult>& results) {
  for (const auto& lut : results) {
    if (lut.version != KernelVersion::FusedLut) continue;
    for (const auto& ex : results) {
      if (ex.version == KernelVersion::FusedExact && ex.config.batch == lut.config.batch &&
          ex.config.d_in == lut.config.d_in && ex.config.d_out == lut.config.d_out &&
          ex.config.degree == lut.config.degree && lut.samples_per_s < ex.samples_per_s) {
        std::fprintf(stderr, "warning: fused-lut slower than fused-exact on (%ju,%ju,%ju,%ju)\n",
                     static_cast<std::uintmax_t>(lut.config.batch), static_cast<std::uintmax_t>(lut.config.d_in),
                     static_cast<std::uintmax_t>(lut.config.d_out), static_cast<std::uintmax_t>(lut.config.degree));
      }
    }
  }
}

void cmd_bench(const BenchArgs& a) {
  std::vector<LayerConfig> configs;
  std::vector<KernelVersion> versions;
  try {
    configs = a.configs == "paper" ? benchmark_configs() : parse_config_file(a.configs);
    versions = parse_kernel_versions(a.versions);
    (void)TileSchedule(1, 1, a.tiles);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (a.reps == 0) throw UsageError("--reps must be positive");
  if (a.lut_size < 2) throw UsageError("lut_size must be ≥ 2, got " + std::to_string(a.lut_size));

  std::vector<RooflineReport> roof;
  for (const auto& c : configs) roof.push_back(roofline(c, a.imax));
  if (!a.json.empty()) {
    ensure_parent(a.json);
    std::ofstream out(a.json);
    if (!out) throw IoError("cannot write '" + a.json + "'");
    out << roofline_json(roof) << '\n';
  }

  BenchOptions opts;
  opts.reps = a.reps;
  opts.warmups = a.warmups;
  opts.seed = a.seed;
  opts.workers = a.workers;
  opts.tiles = a.tiles;
  opts.lut_size = a.lut_size;
  const auto results = run_bench(configs, versions, opts);

  if (!a.csv.empty()) {
    ensure_parent(a.csv);
    std::ofstream out(a.csv);
    if (!out) throw IoError("cannot write '" + a.csv + "'");
    write_bench_csv(out, results);
  }
  std::printf("workers=%u reps=%zu warmups=%zu\n", a.workers, a.reps, a.warmups);
  std::printf("%-22s %-22s %12s %12s %14s %10s %s\n", "config", "version", "fwd_ms", "bwd_ms", "samples/s",
              "intensity", "regime");
  for (const auto& r : results) {
    const auto rr = roofline(r.config, a.imax);
    char cfg[64];
    std::snprintf(cfg, sizeof cfg, "%ju,%ju,%ju,%ju", static_cast<std::uintmax_t>(r.config.batch),
                  static_cast<std::uintmax_t>(r.config.d_in), static_cast<std::uintmax_t>(r.config.d_out),
                  static_cast<std::uintmax_t>(r.config.degree));
    std::printf("%-22s %-22s %12.3f %12.3f %14.1f %10.3f %s\n", cfg, std::string(to_string(r.version)).c_str(),
                r.fwd_ms, r.bwd_ms, r.samples_per_s, rr.intensity, std::string(to_string(rr.regime)).c_str());
  }
  warn_ordering(results);
}

// --- train --------------------------------------------------------------------

struct TrainArgs {
  std::string data = "synthetic:cheb2";
  std::string arch = "1,1";
  int degree = 2;
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::string mode = "lut";
  std::string basis = "chebyshev";
  std::string loss = "mse";
  std::size_t batch_size = 8;
  std::uint64_t seed = 0;
  std::string out = "polykan-run";
  unsigned workers = 1;
  std::size_t lut_size = kDefaultLutSize;
  bool validate = false;
};

void cmd_train(const TrainArgs& a) {
  const auto widths = parse_arch(a.arch);
  KernelMode mode;
  NetworkSpec spec;
  if (a.mode == "lut") {
    mode.basis_path = BasisPath::LutInterp;
  } else if (a.mode == "exact") {
    mode.basis_path = BasisPath::ExactRecurrence;
  } else {
    throw UsageError("--mode must be lut or exact");
  }
  mode.validate_finite = a.validate;
  if (a.degree < 0) throw UsageError("--degree must be non-negative");
  if (a.batch_size == 0) throw UsageError("--batch-size must be positive");
  if (a.lut_size < 2) throw UsageError("lut_size must be ≥ 2, got " + std::to_string(a.lut_size));
  try {
    spec = make_network_spec(widths, a.degree, parse_basis_kind(a.basis), mode, parse_loss_kind(a.loss));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  Dataset data;
  const std::string prefix = "synthetic:";
  if (a.data.rfind(prefix, 0) == 0) {
    try {
      data = synthetic_dataset(a.data.substr(prefix.size()), a.seed);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else {
    data = load_csv_dataset(a.data);
  }
  if (data.features.cols() != widths.front()) {
    throw UsageError("dataset has " + std::to_string(data.features.cols()) + " feature column(s) but --arch starts at " +
                     std::to_string(widths.front()));
  }

  RuntimeOptions rt;
  rt.workers = a.workers;
  rt.lut_size = a.lut_size;
  Network net(spec, a.seed, rt);
  TrainOptions opts;
  opts.epochs = a.epochs;
  opts.batch_size = a.batch_size;
  opts.adam.lr = a.lr;
  opts.seed = a.seed;
  const TrainingTrace trace = network_train(net, data, opts);

  const fs::path dir(a.out);
  save_network(net, dir);
  {
    std::ofstream loss(dir / "loss.csv");
    if (!loss) throw IoError("cannot write '" + (dir / "loss.csv").string() + "'");
    loss << "epoch,loss\n";
    char buf[64];
    for (const auto& e : trace.epochs) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e.epoch, e.loss);
      loss << buf;
    }
  }
  {
    std::ofstream timing(dir / "timing.csv");
    if (!timing) throw IoError("cannot write '" + (dir / "timing.csv").string() + "'");
    timing << "epoch,forward_s,backward_s,step_s\n";
    for (const auto& e : trace.epochs) {
      timing << e.epoch << ',' << e.forward_s << ',' << e.backward_s << ',' << e.step_s << '\n';
    }
  }
  std::printf("trained %zu epoch(s) on %zu rows, mode %s, workers %u\n", a.epochs, data.size(), a.mode.c_str(),
              a.workers);
  std::printf("final %s: %.9g\n", std::string(to_string(spec.loss)).c_str(), trace.final_loss);
  std::printf("wrote %s\n", dir.string().c_str());
}

void add_tile_flags(CLI::App* cmd, TileParams& tiles) {
  cmd->add_option("--tile-in", tiles.tile_in, "Inputs per tile (TILE_IN)")->capture_default_str();
  cmd->add_option("--tile-out", tiles.tile_out, "Outputs per tile (TILE_OUT, one lane row each)")
      ->capture_default_str();
  cmd->add_option("--lane-x", tiles.lane_x, "Input lanes per lane row")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polykan: fused polynomial KAN layer kernels, benchmarks, and training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "polykan 0.1.0");

  LutBuildArgs lut_args;
  auto* lut_cmd = app.add_subcommand("lut-build", "Build a basis lookup table file");
  lut_cmd->add_option("--basis", lut_args.basis, "Basis: chebyshev, legendre, hermite, fourier")->capture_default_str();
  lut_cmd->add_option("--degree", lut_args.degree, "Highest basis order d")->capture_default_str();
  lut_cmd->add_option("--size", lut_args.size, "Grid points (lut_size >= 2)")->capture_default_str();
  lut_cmd->add_option("--out", lut_args.out, "Output .pklt path")->required();

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Check kernel invariants against their bounds");
  verify_cmd->add_option("--config", verify_args.config, "Suite size: small or full")->capture_default_str();
  verify_cmd->add_option("--seed", verify_args.seed, "Seed for random instances")->capture_default_str();
  verify_cmd->add_option("--workers", verify_args.workers, "Kernel worker threads")
      ->envname("POLYKAN_WORKERS")
      ->capture_default_str();
  verify_cmd->add_option("--inject-fault", verify_args.fault, "Test fixture fault")->group("");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time kernel versions on layer configurations");
  bench_cmd->add_option("--configs", bench_args.configs, "'paper' or a file of B,d_in,d_out,degree[,lambda] lines")
      ->capture_default_str();
  bench_cmd->add_option("--versions", bench_args.versions,
                        "'all' or comma list of reference-trig, reference-recurrence, fused-exact, fused-lut, "
                        "fused-lut+reorder")
      ->capture_default_str();
  bench_cmd->add_option("--reps", bench_args.reps, "Timed repetitions per version")->capture_default_str();
  bench_cmd->add_option("--warmups", bench_args.warmups, "Untimed warm-up repetitions")->capture_default_str();
  bench_cmd->add_option("--csv", bench_args.csv, "Write results as CSV");
  bench_cmd->add_option("--json", bench_args.json, "Write roofline reports as JSON");
  bench_cmd->add_option("--imax", bench_args.imax, "Machine ridge intensity, FLOP/byte")->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed, "Seed for benchmark inputs")->capture_default_str();
  bench_cmd->add_option("--workers", bench_args.workers, "Kernel worker threads")
      ->envname("POLYKAN_WORKERS")
      ->capture_default_str();
  bench_cmd->add_option("--lut-size", bench_args.lut_size, "LUT grid points")->capture_default_str();
  add_tile_flags(bench_cmd, bench_args.tiles);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a KAN network");
  train_cmd->add_option("--data", train_args.data, "CSV path or synthetic:NAME (cheb2, sincos)")
      ->capture_default_str();
  train_cmd->add_option("--arch", train_args.arch, "Layer widths, e.g. \"40,256,256,12\"")->capture_default_str();
  train_cmd->add_option("--degree", train_args.degree, "Basis degree of every layer")->capture_default_str();
  train_cmd->add_option("--epochs", train_args.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  train_cmd->add_option("--mode", train_args.mode, "Basis evaluation: lut or exact")->capture_default_str();
  train_cmd->add_option("--basis", train_args.basis, "Basis family")->capture_default_str();
  train_cmd->add_option("--loss", train_args.loss, "mse, cross-entropy, or rmsle")->capture_default_str();
  train_cmd->add_option("--batch-size", train_args.batch_size, "Mini-batch rows")->capture_default_str();
  train_cmd->add_option("--seed", train_args.seed, "Seed for init, shuffling, synthetic data")->capture_default_str();
  train_cmd->add_option("--out", train_args.out, "Output directory (loss.csv, timing.csv, checkpoint)")
      ->capture_default_str();
  train_cmd->add_option("--workers", train_args.workers, "Kernel worker threads")
      ->envname("POLYKAN_WORKERS")
      ->capture_default_str();
  train_cmd->add_option("--lut-size", train_args.lut_size, "LUT grid points")->capture_default_str();
  train_cmd->add_flag("--validate", train_args.validate, "Reject non-finite kernel inputs");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (lut_cmd->parsed()) cmd_lut_build(lut_args);
    if (verify_cmd->parsed()) cmd_verify(verify_args);
    if (bench_cmd->parsed()) cmd_bench(bench_args);
    if (train_cmd->parsed()) cmd_train(train_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const VerifyFailure& e) {
    std::fprintf(stderr, "verification failed: %s\n", e.what());
    return kExitVerify;
  } catch (const TrainingError& e) {
    std::fprintf(stderr, "training diverged: %s\n", e.what());
    return kExitVerify;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitIo;
  } catch (const IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
