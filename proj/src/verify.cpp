// SPDX-License-Identifier: Apache-2.0

#include "polykan/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "polykan/basis.hpp"
#include "polykan/kernels.hpp"
#include "polykan/lut.hpp"
#include "polykan/rng.hpp"
#include "polykan/tensor.hpp"

namespace polykan {
namespace {

struct Instance {
  Matrix x;
  CoeffTensor jod;
  CoeffTensor doj;
  Matrix dy;
  int degree;
};

Instance random_instance(Rng& rng, std::size_t max_dim, int max_degree) {
  const std::size_t b = 1 + rng.below(max_dim);
  const std::size_t n = 1 + rng.below(max_dim);
  const std::size_t m = 1 + rng.below(max_dim);
  const int d = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_degree) + 1));
  Instance in{Matrix(b, n), CoeffTensor(n, m, static_cast<std::size_t>(d) + 1, CoeffLayout::JOD), {}, Matrix(b, m), d};
  for (auto& v : in.x.data()) v = static_cast<float>(rng.uniform(-3.0, 3.0));
  for (auto& v : in.jod.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& v : in.dy.data()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  in.doj = reorder_to_doj(in.jod);
  return in;
}

template <typename A, typename B>
double rel_error(const A& got, const B& want) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    diff = std::max(diff, std::fabs(static_cast<double>(got[i]) - static_cast<double>(want[i])));
    scale = std::max(scale, std::fabs(static_cast<double>(want[i])));
  }
  return scale > 0.0 ? diff / scale : diff;
}

double matrix_rel(const Matrix& got, const Matrix& want) { return rel_error(got.data(), want.data()); }

double coeff_rel(const CoeffTensor& got, const CoeffTensor& want) {
  const CoeffTensor a = got.layout() == CoeffLayout::JOD ? got : reorder_to_jod(got);
  const CoeffTensor b = want.layout() == CoeffLayout::JOD ? want : reorder_to_jod(want);
  return rel_error(a.data(), b.data());
}

double dot(const std::vector<double>& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<double>(b.data()[i]);
  return s;
}

LutTable with_flipped_slopes(const LutTable& t) {
  std::vector<float> slopes(t.slopes().begin(), t.slopes().end());
  for (auto& s : slopes) s = -s;
  return LutTable::from_parts(t.kind(), t.degree(), t.size(), {t.values().begin(), t.values().end()},
                              std::move(slopes));
}

class Suite {
 public:
  void check(std::string name, double observed, double bound, std::string detail = {}) {
    report_.properties.push_back({std::move(name), observed, bound, observed <= bound, std::move(detail)});
  }

  VerifyReport take() { return std::move(report_); }

 private:
  VerifyReport report_;
};

}  // namespace

VerifyScope parse_verify_scope(std::string_view name) {
  if (name == "small") return VerifyScope::Small;
  if (name == "full") return VerifyScope::Full;
  throw std::invalid_argument("unknown verify config '" + std::string(name) + "' (expected small or full)");
}

InjectedFault parse_injected_fault(std::string_view name) {
  if (name == "none") return InjectedFault::None;
  if (name == "slope-sign") return InjectedFault::SlopeSign;
  throw std::invalid_argument("unknown fault '" + std::string(name) + "'");
}

bool VerifyReport::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
}

std::vector<std::string> VerifyReport::failures() const {
  std::vector<std::string> out;
  for (const auto& p : properties) {
    if (!p.passed) out.push_back(p.name);
  }
  return out;
}

VerifyReport run_verify(const VerifyOptions& opts) {
  const bool full = opts.scope == VerifyScope::Full;
  const std::size_t instances = full ? 100 : 10;
  const std::size_t max_dim = full ? 64 : 16;
  const int max_degree = full ? 24 : 8;
  const std::size_t lut_points = full ? 100000 : 10000;
  const unsigned workers = std::max(1u, opts.workers);
  const KernelMode exact{BasisPath::ExactRecurrence, true, true};
  const KernelMode interp{BasisPath::LutInterp, true, true};
  Suite suite;

  // Basis strategies.
  {
    Rng rng(mix_seed(opts.seed, 1));
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = rng.uniform(-1.0, 1.0);
      const auto a = eval_basis(BasisKind::Chebyshev, 32, x);
      const auto b = eval_basis_trig(32, x);
      for (std::size_t k = 0; k < a.size(); ++k) worst = std::max(worst, std::fabs(a[k] - b[k]));
    }
    suite.check("basis-strategy-equivalence", worst, 1e-10, "recurrence vs cos(n arccos x), d=32");
  }

  // Tables: interpolation error against the closed-form bound, and slope
  // consistency of the (possibly corrupted) table the kernels will use.
  std::vector<LutTable> tables;
  for (int d = 0; d <= max_degree; ++d) {
    LutTable t = LutTable::build(BasisKind::Chebyshev, d, kDefaultLutSize);
    tables.push_back(opts.fault == InjectedFault::SlopeSign ? with_flipped_slopes(t) : std::move(t));
  }
  {
    Rng rng(mix_seed(opts.seed, 2));
    const std::vector<int> degrees = full ? std::vector<int>{1, 2, 4, 8, 12, 16, 20, 24} : std::vector<int>{2, 8};
    double worst_ratio = 0.0, worst_abs = 0.0;
    for (int d : degrees) {
      const LutTable& t = tables[static_cast<std::size_t>(d)];
      const auto bound = lut_max_error_bound(t);
      const auto storage = lut_storage_error_bound(t);
      std::vector<double> h(t.features());
      for (std::size_t p = 0; p < lut_points; ++p) {
        const double x = rng.uniform(-1.0, 1.0);
        const auto approx = lut_interp(t, x);
        eval_basis_into(BasisKind::Chebyshev, d, x, h);
        for (std::size_t k = 0; k < h.size(); ++k) {
          const double err = std::fabs(approx[k] - h[k]);
          worst_abs = std::max(worst_abs, err);
          worst_ratio = std::max(worst_ratio, err / (bound[k] * (1.0 + 1e-6) + storage[k]));
        }
      }
    }
    suite.check("lut-error-bound", worst_ratio, 1.0,
                "measured / (closed-form + float storage), degrees up to " + std::to_string(degrees.back()));
    suite.check("lut-error-absolute", worst_abs, 1e-4, "max |lut - exact|, size 32768");
  }
  {
    double worst = 0.0;
    const LutTable& t = tables.back();
    for (std::size_t k = 0; k < t.features(); ++k) {
      for (std::size_t i = 0; i + 1 < t.size(); ++i) {
        const double fd = (static_cast<double>(t.value(k, i + 1)) - t.value(k, i)) / t.step();
        const double s = t.slope(k, i);
        worst = std::max(worst, std::fabs(s - fd) / std::max(1.0, std::fabs(fd)));
      }
    }
    suite.check("slope-consistency", worst, 1e-6, "stored slope vs (tR - tL)/step");
  }

  Rng rng(mix_seed(opts.seed, 3));
  double fwd_exact = 0.0, bwd_coeff = 0.0, bwd_x = 0.0, lut_prox = 0.0, lin = 0.0, mid = 0.0;
  double sched_indep = 0.0;
  double nondeterministic = 0.0, writer = 0.0, merges = 0.0, layout = 0.0;
  for (std::size_t it = 0; it < instances; ++it) {
    const Instance in = random_instance(rng, max_dim, max_degree);
    const std::size_t d_in = in.x.cols(), d_out = in.dy.cols(), batch = in.x.rows();
    const LutTable& lut = tables[static_cast<std::size_t>(in.degree)];
    const TileSchedule sched(d_in, d_out);
    const ReferenceOptions ref{BasisKind::Chebyshev, ReferencePath::Recurrence, nullptr, true, 1};

    // Exact path against the unfused reference.
    const Matrix y_exact = fused_forward(in.x, in.doj, lut, sched, exact, {}, {workers});
    const Matrix y_ref = reference_forward(in.x, in.jod, ref);
    fwd_exact = std::max(fwd_exact, matrix_rel(y_exact, y_ref));
    const BackwardResult g_exact = backward_fused(in.x, in.doj, in.dy, lut, sched, exact, {workers});
    const BackwardResult g_ref = reference_backward(in.x, in.jod, in.dy, ref);
    bwd_coeff = std::max(bwd_coeff, coeff_rel(g_exact.coeff_grad, g_ref.coeff_grad));
    bwd_x = std::max(bwd_x, matrix_rel(g_exact.x_grad, g_ref.x_grad));

    // LUT forward against the exact reference, scaled by the table bound.
    const Matrix y_lut = fused_forward(in.x, in.doj, lut, sched, interp, {}, {workers});
    {
      const auto bound = lut_max_error_bound(lut);
      const auto storage = lut_storage_error_bound(lut);
      double per_input = 0.0;
      for (std::size_t k = 0; k < bound.size(); ++k) per_input = std::max(per_input, bound[k] + storage[k]);
      double cmax = 0.0;
      for (float c : in.jod.data()) cmax = std::max(cmax, static_cast<double>(std::fabs(c)));
      // Float accumulation of D_in * features terms adds rounding on top.
      const double rounding = 0x1p-20 * static_cast<double>(d_in * lut.features()) * cmax;
      const double allowed = static_cast<double>(d_in) * cmax * per_input + rounding;
      double worst = 0.0;
      for (std::size_t i = 0; i < y_ref.size(); ++i) {
        worst = std::max(worst, std::fabs(static_cast<double>(y_lut.data()[i]) - y_ref.data()[i]));
      }
      lut_prox = std::max(lut_prox, worst / allowed);
    }

    // LUT coefficient gradient: the loss sum(dY * y) is linear in each
    // coefficient, so a unit central difference is exact.
    const BackwardResult g_lut = backward_fused(in.x, in.doj, in.dy, lut, sched, interp, {workers});
    {
      const ReferenceOptions lref{BasisKind::Chebyshev, ReferencePath::Lut, &lut, true, 1};
      CoeffTensor probe = in.jod;
      const CoeffTensor grad = reorder_to_jod(g_lut.coeff_grad);
      double diff = 0.0, scale = 0.0;
      for (int s = 0; s < 8; ++s) {
        const std::size_t e = rng.below(probe.size());
        const float keep = probe.data()[e];
        probe.data()[e] = keep + 1.0f;
        const double up = dot(reference_forward_f64(in.x, probe, lref), in.dy);
        probe.data()[e] = keep - 1.0f;
        const double down = dot(reference_forward_f64(in.x, probe, lref), in.dy);
        probe.data()[e] = keep;
        const double fd = (up - down) / 2.0;
        diff = std::max(diff, std::fabs(grad.data()[e] - fd));
        scale = std::max(scale, std::fabs(fd));
      }
      lin = std::max(lin, scale > 0.0 ? diff / scale : diff);
    }

    // LUT input gradient at cell midpoints: within one cell the surrogate is
    // linear in the normalized input, so the difference quotient over
    // +-step/8 (measured on the actual float inputs) is its slope.
    {
      Matrix xm(1, d_in);
      for (std::size_t j = 0; j < d_in; ++j) {
        const std::size_t cell = 1000 + rng.below(lut.size() - 2001);
        const double xt = -1.0 + (static_cast<double>(cell) + 0.5) * lut.step();
        xm(0, j) = static_cast<float>(std::atanh(xt));
      }
      Matrix dy1(1, d_out);
      for (std::size_t o = 0; o < d_out; ++o) dy1(0, o) = in.dy(0, o);
      const BackwardResult g = backward_fused(xm, in.doj, dy1, lut, sched, interp, {workers});
      const ReferenceOptions lref{BasisKind::Chebyshev, ReferencePath::Lut, &lut, true, 1};
      const double h = lut.step() / 8.0;
      double diff = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < d_in; ++j) {
        const double xt = std::tanh(static_cast<double>(xm(0, j)));
        Matrix xp = xm, xq = xm;
        xp(0, j) = static_cast<float>(std::atanh(xt + h));
        xq(0, j) = static_cast<float>(std::atanh(xt - h));
        const double tp = std::tanh(static_cast<double>(xp(0, j)));
        const double tq = std::tanh(static_cast<double>(xq(0, j)));
        std::vector<double> yp = reference_forward_f64(xp, in.jod, lref);
        std::vector<double> yq = reference_forward_f64(xq, in.jod, lref);
        const double slope = (dot(yp, dy1) - dot(yq, dy1)) / (tp - tq);
        const double want = slope * (1.0 - xt * xt);
        diff = std::max(diff, std::fabs(g.x_grad(0, j) - want));
        scale = std::max(scale, std::fabs(want));
      }
      mid = std::max(mid, scale > 1e-12 ? diff / scale : diff);
    }

    // Determinism across runs and worker counts.
    {
      const Matrix again = fused_forward(in.x, in.doj, lut, sched, interp, {}, {workers});
      const Matrix four = fused_forward(in.x, in.doj, lut, sched, interp, {}, {4});
      const BackwardResult g_four = backward_fused(in.x, in.doj, in.dy, lut, sched, interp, {4});
      if (!(again == y_lut) || !(four == y_lut) || !(g_four.coeff_grad == g_lut.coeff_grad) ||
          !(g_four.x_grad == g_lut.x_grad)) {
        nondeterministic += 1.0;
      }
    }

    // Tile-schedule independence.
    for (std::size_t ti : {16u, 64u}) {
      for (std::size_t to : {8u, 32u}) {
        const TileSchedule alt(d_in, d_out, {ti, to, 8});
        const Matrix y_alt = fused_forward(in.x, in.doj, lut, alt, interp, {}, {workers});
        sched_indep = std::max(sched_indep, matrix_rel(y_alt, y_lut));
      }
    }

    // Unique writer and merge counts.
    {
      const TileSchedule small(d_in, d_out, {16, 8, 8});
      PartialBuffer partial(small, batch, true);
      KernelCounters counters;
      forward_partial(in.x, in.doj, lut, small, interp, partial, {workers, &counters});
      // Lane rows past D_out in the last output tile are padding and stay unwritten.
      const auto counts = partial.write_counts();
      for (std::size_t to = 0; to < small.g_y(); ++to) {
        for (std::size_t ti = 0; ti < small.g_x(); ++ti) {
          for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t ty = 0; ty < small.tile_out(); ++ty) {
              const double want = to * small.tile_out() + ty < d_out ? 1.0 : 0.0;
              writer = std::max(writer, std::fabs(double(counts[partial.slot(to, ti, b, ty)]) - want));
            }
          }
        }
      }
      (void)backward_fused(in.x, in.doj, in.dy, lut, small, interp, {workers, &counters});
      const AtomicCounts want = count_atomics(batch, d_in, d_out, small);
      merges += std::fabs(double(counters.forward_atomic_updates) - double(want.fwd_ours)) +
                std::fabs(double(counters.backward_x_merges) - double(want.bwd_x_ours));
    }

    if (!(reorder_to_jod(in.doj) == in.jod)) layout += 1.0;
  }

  suite.check("oracle-forward-exact", fwd_exact, 1e-5, "fused exact vs unfused reference, relative");
  suite.check("oracle-backward-coeff", bwd_coeff, 1e-5, "fused exact coeff_grad vs reference, relative");
  suite.check("oracle-backward-x", bwd_x, 1e-5, "fused exact x_grad vs reference, relative");
  suite.check("lut-forward-proximity", lut_prox, 1.0, "|lut - exact| / (D_in * cmax * bound)");
  suite.check("lut-coeff-grad-linearity", lin, 1e-4, "coeff_grad vs central difference of LUT forward");
  suite.check("lut-x-grad-midpoint", mid, 1e-3, "x_grad vs cell-slope difference quotient");
  suite.check("determinism", nondeterministic, 0.0, "instances with any bit difference (runs, workers 1/4)");
  suite.check("schedule-independence", sched_indep, 1e-5, "TILE_IN {16,64} x TILE_OUT {8,32}");
  suite.check("unique-writer", writer, 0.0, "max |writes per slot - 1| (0 for padding lanes)");
  suite.check("merge-counts", merges, 0.0, "|counters - closed-form counts|");
  suite.check("layout-roundtrip", layout, 0.0, "JOD -> DOJ -> JOD mismatches");
  return suite.take();
}

std::string format_report(const VerifyReport& report) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-28s %14s %14s  %s\n", "property", "observed", "bound", "status");
  os << line;
  for (const auto& p : report.properties) {
    std::snprintf(line, sizeof line, "%-28s %14.6g %14.6g  %s\n", p.name.c_str(), p.observed, p.bound,
                  p.passed ? "ok" : "FAIL");
    os << line;
  }
  return os.str();
}

}  // namespace polykan
