// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <ostream>
#include <stdexcept>

#include "polykan/perf.hpp"
#include "polykan/rng.hpp"

namespace polykan {
namespace {

using Clock = std::chrono::steady_clock;

double time_ms(const std::function<void()>& fn) {
  const auto t0 = Clock::now();
  fn();
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Forward and backward closures for one version over fixed inputs.
struct Runner {
  std::function<void()> forward;
  std::function<void()> backward;
};

}  // namespace

std::string_view to_string(KernelVersion v) {
  switch (v) {
    case KernelVersion::ReferenceTrig: return "reference-trig";
    case KernelVersion::ReferenceRecurrence: return "reference-recurrence";
    case KernelVersion::FusedExact: return "fused-exact";
    case KernelVersion::FusedLut: return "fused-lut";
    case KernelVersion::FusedLutReorder: return "fused-lut+reorder";
  }
  return "?";
}

std::vector<KernelVersion> all_kernel_versions() {
  return {KernelVersion::ReferenceTrig, KernelVersion::ReferenceRecurrence, KernelVersion::FusedExact,
          KernelVersion::FusedLut, KernelVersion::FusedLutReorder};
}

KernelVersion parse_kernel_version(std::string_view name) {
  for (auto v : all_kernel_versions()) {
    if (to_string(v) == name) return v;
  }
  throw std::invalid_argument("unknown kernel version '" + std::string(name) + "'");
}

std::vector<KernelVersion> parse_kernel_versions(std::string_view list) {
  if (list == "all") return all_kernel_versions();
  std::vector<KernelVersion> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto item = list.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    out.push_back(parse_kernel_version(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

BenchInputs make_bench_inputs(const LayerConfig& c, std::uint64_t seed) {
  validate(c);
  const std::size_t b = c.batch, n = c.d_in, m = c.d_out, f = c.degree + 1;
  Rng rng(mix_seed(seed, 0xBE7C));
  BenchInputs in{Matrix(b, n), CoeffTensor(n, m, f, CoeffLayout::JOD), Matrix(b, m)};
  for (auto& v : in.x.data()) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  const double s = 1.0 / std::sqrt(static_cast<double>(n * f));
  for (auto& v : in.coeff.data()) v = static_cast<float>(s * rng.uniform(-1.0, 1.0));
  for (auto& v : in.dy.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return in;
}

std::vector<BenchResult> run_bench(const std::vector<LayerConfig>& configs, const std::vector<KernelVersion>& versions,
                                   const BenchOptions& opts) {
  if (opts.reps == 0) throw std::invalid_argument("reps must be positive");
  std::vector<BenchResult> results;
  for (const auto& c : configs) {
    const BenchInputs in = make_bench_inputs(c, opts.seed);
    const int degree = static_cast<int>(c.degree);
    const CoeffTensor doj = reorder_to_doj(in.coeff);
    const TileSchedule sched(c.d_in, c.d_out, opts.tiles);
    const LutTable lut = LutTable::build(BasisKind::Chebyshev, degree, opts.lut_size);
    const LutTable stub = LutTable::build(BasisKind::Chebyshev, degree, 2);
    const ExecOptions exec{opts.workers, nullptr};
    const KernelMode exact{BasisPath::ExactRecurrence, true, false};
    const KernelMode interp{BasisPath::LutInterp, true, false};

    for (const auto v : versions) {
      Runner run;
      Matrix sink;
      BackwardResult grads;
      auto reference = [&](ReferencePath path) {
        const ReferenceOptions ro{BasisKind::Chebyshev, path, nullptr, true, opts.workers};
        run.forward = [&, ro] { sink = reference_forward(in.x, in.coeff, ro); };
        run.backward = [&, ro] { grads = reference_backward(in.x, in.coeff, in.dy, ro); };
      };
      auto fused = [&](const CoeffTensor& coeff, const LutTable& table, const KernelMode& mode) {
        const CoeffTensor* cp = &coeff;
        const LutTable* tp = &table;
        run.forward = [&, cp, tp, mode] { sink = fused_forward(in.x, *cp, *tp, sched, mode, {}, exec); };
        run.backward = [&, cp, tp, mode] { grads = backward_fused(in.x, *cp, in.dy, *tp, sched, mode, exec); };
      };
      switch (v) {
        case KernelVersion::ReferenceTrig: reference(ReferencePath::Trig); break;
        case KernelVersion::ReferenceRecurrence: reference(ReferencePath::Recurrence); break;
        case KernelVersion::FusedExact: fused(in.coeff, stub, exact); break;
        case KernelVersion::FusedLut: fused(in.coeff, lut, interp); break;
        case KernelVersion::FusedLutReorder: fused(doj, lut, interp); break;
      }

      for (std::size_t i = 0; i < opts.warmups; ++i) {
        run.forward();
        run.backward();
      }
      std::vector<double> fwd(opts.reps), bwd(opts.reps);
      double total_ms = 0.0;
      for (std::size_t i = 0; i < opts.reps; ++i) {
        fwd[i] = time_ms(run.forward);
        bwd[i] = time_ms(run.backward);
        total_ms += fwd[i] + bwd[i];
      }
      const double total_s = total_ms / 1000.0;
      results.push_back({c, v, opts.workers, opts.reps, median(fwd), median(bwd), total_s,
                         static_cast<double>(c.batch * opts.reps) / total_s});
    }
  }
  return results;
}

void write_bench_csv(std::ostream& out, const std::vector<BenchResult>& results) {
  out << "B,d_in,d_out,degree,lambda,version,workers,fwd_ms,bwd_ms,samples_per_s\n";
  for (const auto& r : results) {
    out << r.config.batch << ',' << r.config.d_in << ',' << r.config.d_out << ',' << r.config.degree << ','
        << r.config.lambda << ',' << to_string(r.version) << ',' << r.workers << ',' << r.fwd_ms << ','
        << r.bwd_ms << ',' << r.samples_per_s << '\n';
  }
}

}  // namespace polykan
