// SPDX-License-Identifier: Apache-2.0
//
// Correctness acceptance suite. One line per criterion:
//   PASS|FAIL  [n] name  observed vs tolerance
// Exit status is nonzero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "../support/oracle.hpp"
#include "polykan/basis.hpp"
#include "polykan/data.hpp"
#include "polykan/kernels.hpp"
#include "polykan/lut.hpp"
#include "polykan/model.hpp"
#include "polykan/perf.hpp"
#include "polykan/rng.hpp"
#include "polykan/tensor.hpp"

using namespace polykan;

namespace {

struct Outcome {
  bool passed;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t draw(Rng& rng, std::size_t lo, std::size_t hi) { return lo + rng.below(hi - lo + 1); }

constexpr KernelMode kExact{BasisPath::ExactRecurrence, true, true};
constexpr KernelMode kLut{BasisPath::LutInterp, true, true};

// Directional derivative check: |fd - <g, v>| / sum |g_i v_i|.
double directional_error(double fd, const std::vector<double>& g, const std::vector<double>& v) {
  double dot = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    dot += g[i] * v[i];
    scale += std::fabs(g[i] * v[i]);
  }
  return scale > 0 ? std::fabs(fd - dot) / scale : std::fabs(fd - dot);
}

double inf_norm(const std::vector<double>& g) {
  double m = 0.0;
  for (double v : g) m = std::max(m, std::fabs(v));
  return m;
}

std::vector<double> jod_values(const CoeffTensor& c) {
  const CoeffTensor j = c.layout() == CoeffLayout::JOD ? c : reorder_to_jod(c);
  return {j.data().begin(), j.data().end()};
}

// ---------------------------------------------------------------------------

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(11);
  double fwd = 0.0, bwd = 0.0, fd = 0.0;
  constexpr double h = 1e-5;
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t B = draw(rng, 1, 64), I = draw(rng, 1, 64), O = draw(rng, 1, 64);
    const int d = int(draw(rng, 0, 24));
    const std::size_t F = std::size_t(d) + 1;
    const Matrix x = oracle::random_matrix(rng, B, I, -2.0, 2.0);
    const Matrix dy = oracle::random_matrix(rng, B, O, -1.0, 1.0);
    const CoeffTensor jod = oracle::random_coeff(rng, I, O, F, 1.0 / std::sqrt(double(I * F)));
    const CoeffTensor doj = reorder_to_doj(jod);
    const LutTable stub = LutTable::build(BasisKind::Chebyshev, d, 2);
    const TileSchedule sched(I, O);

    const Matrix y = fused_forward(x, doj, stub, sched, kExact);
    const Matrix y_ref = reference_forward(x, jod);
    const oracle::Layer layer = oracle::Layer::from(jod);
    const std::vector<double> xd = oracle::to_double(x);
    const std::vector<double> feats = oracle::cheb_features(xd, B, I, F);
    const std::vector<double> y_or = oracle::layer_forward(layer, feats, B);
    fwd = std::max({fwd, oracle::normwise(y.data(), y_ref.data()), oracle::normwise(y.data(), y_or)});

    const BackwardResult g = backward_fused(x, doj, dy, stub, sched, kExact);
    const BackwardResult g_ref = reference_backward(x, jod, dy);
    const std::vector<double> cg = jod_values(g.coeff_grad);
    const std::vector<double> xg = oracle::to_double(g.x_grad);
    bwd = std::max({bwd, oracle::normwise(cg, g_ref.coeff_grad.data()),
                    oracle::normwise(xg, g_ref.x_grad.data())});

    // L = sum dY * y, differentiated by central differences of the oracle.
    auto loss_c = [&](const oracle::Layer& l) { return oracle::weighted_sum(oracle::layer_forward(l, feats, B), dy); };
    auto loss_x = [&](const std::vector<double>& xs) {
      return oracle::weighted_sum(oracle::layer_forward(layer, oracle::cheb_features(xs, B, I, F), B), dy);
    };
    for (int rep = 0; rep < 2; ++rep) {
      std::vector<double> v(cg.size());
      for (double& e : v) e = rng.uniform(-1.0, 1.0);
      oracle::Layer lp = layer, lm = layer;
      for (std::size_t i = 0; i < v.size(); ++i) {
        lp.c[i] += h * v[i];
        lm.c[i] -= h * v[i];
      }
      fd = std::max(fd, directional_error((loss_c(lp) - loss_c(lm)) / (2 * h), cg, v));

      std::vector<double> w(xg.size()), xp = xd, xm = xd;
      for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = rng.uniform(-1.0, 1.0);
        xp[i] += h * w[i];
        xm[i] -= h * w[i];
      }
      fd = std::max(fd, directional_error((loss_x(xp) - loss_x(xm)) / (2 * h), xg, w));
    }
    const double cg_scale = inf_norm(cg), xg_scale = inf_norm(xg);
    for (int rep = 0; rep < 6; ++rep) {
      const std::size_t ci = rng.below(cg.size());
      oracle::Layer lp = layer, lm = layer;
      lp.c[ci] += h;
      lm.c[ci] -= h;
      const double fdc = (loss_c(lp) - loss_c(lm)) / (2 * h);
      if (cg_scale > 0) fd = std::max(fd, std::fabs(fdc - cg[ci]) / cg_scale);

      const std::size_t xi = rng.below(xg.size());
      std::vector<double> xp = xd, xm = xd;
      xp[xi] += h;
      xm[xi] -= h;
      const double fdx = (loss_x(xp) - loss_x(xm)) / (2 * h);
      if (xg_scale > 0) fd = std::max(fd, std::fabs(fdx - xg[xi]) / xg_scale);
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = fwd <= 1e-5 && bwd <= 1e-5 && fd <= 1e-3 && secs < 120.0;
  return {ok, fmt("forward %.2e, backward %.2e (<= 1e-5); gradient vs FD %.2e (<= 1e-3); %.1f s (< 120)", fwd, bwd,
                  fd, secs)};
}

// ---------------------------------------------------------------------------

Outcome lut_fidelity() {
  const std::size_t n = 32768;
  const double step = 2.0 / double(n - 1);
  double worst_ratio = 0.0, worst_abs = 0.0;
  for (int d : {8, 15, 24}) {
    const LutTable t = LutTable::build(BasisKind::Chebyshev, d, n);
    std::vector<double> err(std::size_t(d) + 1, 0.0);
    for (int i = 0; i < 100000; ++i) {
      const double x = -1.0 + 2.0 * i / 99999.0;
      const std::vector<double> v = lut_interp(t, x);
      for (int k = 0; k <= d; ++k) err[k] = std::max(err[k], std::fabs(v[k] - oracle::cheb(k, x)));
    }
    for (int k = 0; k <= d; ++k) {
      // Closed form plus the half-ulp rounding of float32 samples of |T_k| <= 1.
      const double bound = step * step / 8.0 * k * k * (k * k - 1.0) / 3.0;
      const double storage = 0x1p-24;
      worst_ratio = std::max(worst_ratio, err[k] / (bound + storage));
      worst_abs = std::max(worst_abs, err[k]);
    }
  }

  Rng rng(12);
  double layer_ratio = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t B = draw(rng, 1, 32), I = draw(rng, 1, 64), O = draw(rng, 1, 64);
    const int d = int(draw(rng, 0, 24));
    const Matrix x = oracle::random_matrix(rng, B, I, -2.0, 2.0);
    const CoeffTensor doj = oracle::random_coeff(rng, I, O, std::size_t(d) + 1, 1.0, CoeffLayout::DOJ);
    const TileSchedule sched(I, O);
    const Matrix y_lut = fused_forward(x, doj, LutTable::build(BasisKind::Chebyshev, d, n), sched, kLut);
    const Matrix y_ex = fused_forward(x, doj, LutTable::build(BasisKind::Chebyshev, d, 2), sched, kExact);
    for (std::size_t i = 0; i < y_lut.size(); ++i)
      layer_ratio = std::max(layer_ratio, std::fabs(y_lut.data()[i] - y_ex.data()[i]) / (1e-4 * double(I)));
  }
  const bool ok = worst_ratio <= 1.0 && worst_abs <= 1e-4 && layer_ratio <= 1.0;
  return {ok, fmt("max err / (closed-form bound + 2^-24 storage) %.3f (<= 1); max abs %.2e (<= 1e-4); "
                  "layer |lut-exact| / (1e-4 D_in) %.3f (<= 1)",
                  worst_ratio, worst_abs, layer_ratio)};
}

// ---------------------------------------------------------------------------

Outcome gradient_semantics() {
  Rng rng(13);
  const std::size_t n = kDefaultLutSize;
  double coeff_err = 0.0, slope_err = 0.0, slope_fd = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t B = draw(rng, 1, 16), I = draw(rng, 1, 48), O = draw(rng, 1, 48);
    const int d = int(draw(rng, 1, 24));
    const std::size_t F = std::size_t(d) + 1;
    const LutTable table = LutTable::build(BasisKind::Chebyshev, d, n);
    const oracle::LutOracle lut{table};
    const TileSchedule sched(I, O);
    const CoeffTensor jod = oracle::random_coeff(rng, I, O, F, 1.0 / std::sqrt(double(I * F)));
    const CoeffTensor doj = reorder_to_doj(jod);
    const Matrix dy = oracle::random_matrix(rng, B, O, -1.0, 1.0);

    // Inputs placed at cell midpoints of the normalized coordinate.
    Matrix x(B, I);
    for (float& v : x.data()) {
      const std::size_t cell = draw(rng, 300, n - 302);
      v = float(std::atanh(lut.node(cell) + 0.5 * (lut.node(cell + 1) - lut.node(cell))));
    }
    const std::vector<double> xd = oracle::to_double(x);
    const BackwardResult g = backward_fused(x, doj, dy, table, sched, kLut);
    const std::vector<double> cg = jod_values(g.coeff_grad);
    const oracle::Layer layer = oracle::Layer::from(jod);
    const std::vector<double> feats = oracle::lut_features(lut, xd, B, I, F);

    // Coefficient gradient vs finite differences of the interpolated forward.
    auto loss_c = [&](const oracle::Layer& l) { return oracle::weighted_sum(oracle::layer_forward(l, feats, B), dy); };
    const double scale = inf_norm(cg);
    for (int rep = 0; rep < 8; ++rep) {
      const std::size_t ci = rng.below(cg.size());
      oracle::Layer lp = layer, lm = layer;
      lp.c[ci] += 1.0;
      lm.c[ci] -= 1.0;
      coeff_err = std::max(coeff_err, std::fabs((loss_c(lp) - loss_c(lm)) / 2.0 - cg[ci]) / scale);
    }
    std::vector<double> v(cg.size());
    for (double& e : v) e = rng.uniform(-1.0, 1.0);
    oracle::Layer lp = layer, lm = layer;
    for (std::size_t i = 0; i < v.size(); ++i) {
      lp.c[i] += v[i];
      lm.c[i] -= v[i];
    }
    coeff_err = std::max(coeff_err, directional_error((loss_c(lp) - loss_c(lm)) / 2.0, cg, v));

    // Input gradient vs the cell-slope contract (tR - tL) / step times the tanh Jacobian.
    std::vector<double> expect(B * I, 0.0);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t j = 0; j < I; ++j) {
        const double u = std::tanh(xd[b * I + j]);
        double s = 0.0;
        for (std::size_t o = 0; o < O; ++o)
          for (std::size_t k = 1; k < F; ++k) s += dy(b, o) * layer.at(j, o, k) * lut.slope(k, u);
        expect[b * I + j] = s * (1.0 - u * u);
      }
    slope_err = std::max(slope_err, oracle::normwise(g.x_grad.data(), expect));

    // And vs a difference quotient of the interpolated forward inside the cell.
    const double xg_scale = inf_norm(expect);
    for (int rep = 0; rep < 8; ++rep) {
      const std::size_t xi = rng.below(xd.size());
      const double u = std::tanh(xd[xi]);
      const double hx = 1e-3 * (lut.node(1) - lut.node(0)) / (1.0 - u * u);
      std::vector<double> xp = xd, xm = xd;
      xp[xi] += hx;
      xm[xi] -= hx;
      auto loss_x = [&](const std::vector<double>& xs) {
        return oracle::weighted_sum(oracle::layer_forward(layer, oracle::lut_features(lut, xs, B, I, F), B), dy);
      };
      const double fdx = (loss_x(xp) - loss_x(xm)) / (2 * hx);
      if (xg_scale > 0) slope_fd = std::max(slope_fd, std::fabs(fdx - g.x_grad.data()[xi]) / xg_scale);
    }
  }
  const bool ok = coeff_err <= 1e-4 && slope_err <= 1e-3 && slope_fd <= 1e-3;
  return {ok, fmt("coeff grad vs FD %.2e (<= 1e-4); x grad vs cell slope %.2e, vs in-cell FD %.2e (<= 1e-3)",
                  coeff_err, slope_err, slope_fd)};
}

// ---------------------------------------------------------------------------

Outcome two_stage_reduction() {
  Rng rng(14);
  const std::size_t tiles_in[] = {8, 16, 32, 64, 128};
  const std::size_t tiles_out[] = {4, 8, 16, 32};
  const std::size_t lanes[] = {1, 2, 4, 8, 16};
  bool counts_ok = true, bits_ok = true;
  double value_err = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t B = draw(rng, 1, 48), I = draw(rng, 1, 200), O = draw(rng, 1, 200);
    const int d = int(draw(rng, 0, 12));
    const std::size_t F = std::size_t(d) + 1;
    TileParams tp{tiles_in[rng.below(5)], tiles_out[rng.below(4)], lanes[rng.below(5)]};
    const TileSchedule sched(I, O, tp);
    const std::uint64_t g_y = (O + tp.tile_out - 1) / tp.tile_out;
    const std::uint64_t g_x = (I + tp.tile_in - 1) / tp.tile_in;
    const Matrix x = oracle::random_matrix(rng, B, I, -2.0, 2.0);
    const Matrix dy = oracle::random_matrix(rng, B, O, -1.0, 1.0);
    const CoeffTensor jod = oracle::random_coeff(rng, I, O, F, 1.0 / std::sqrt(double(I * F)));
    const CoeffTensor doj = reorder_to_doj(jod);
    const LutTable table = LutTable::build(BasisKind::Chebyshev, d, 4096);
    std::vector<float> bias(O);
    for (float& b : bias) b = float(rng.uniform(-1.0, 1.0));

    for (const KernelMode& mode : {kLut, kExact}) {
      const bool lut_mode = mode.basis_path == BasisPath::LutInterp;
      const LutTable stub = LutTable::build(BasisKind::Chebyshev, d, 2);
      const LutTable& tab = lut_mode ? table : stub;
      KernelCounters c1;
      const Matrix y1 = fused_forward(x, doj, tab, sched, mode, bias, {1, &c1});
      const BackwardResult b1 = backward_fused(x, doj, dy, tab, sched, mode, {1, &c1});
      const AtomicCounts ac = count_atomics(B, I, O, sched);
      counts_ok = counts_ok && c1.forward_atomic_updates == 0 && ac.fwd_ours == 0 &&
                  c1.backward_x_merges == B * I * g_y && ac.bwd_x_ours == B * I * g_y &&
                  ac.fwd_baseline == B * O * g_x && ac.bwd_x_naive == B * I * O;

      ReferenceOptions ro;
      ro.path = lut_mode ? ReferencePath::Lut : ReferencePath::Recurrence;
      ro.lut = lut_mode ? &table : nullptr;
      value_err = std::max(value_err, oracle::normwise(y1.data(), reference_forward(x, jod, ro, bias).data()));
      oracle::Layer layer = oracle::Layer::from(jod, bias);
      const std::vector<double> xd = oracle::to_double(x);
      const std::vector<double> feats = lut_mode ? oracle::lut_features(oracle::LutOracle{table}, xd, B, I, F)
                                                 : oracle::cheb_features(xd, B, I, F);
      value_err = std::max(value_err, oracle::normwise(y1.data(), oracle::layer_forward(layer, feats, B)));

      const Matrix y2 = fused_forward(x, doj, tab, sched, mode, bias, {1});
      const Matrix y4 = fused_forward(x, doj, tab, sched, mode, bias, {4});
      const BackwardResult b2 = backward_fused(x, doj, dy, tab, sched, mode, {1});
      const BackwardResult b4 = backward_fused(x, doj, dy, tab, sched, mode, {4});
      bits_ok = bits_ok && oracle::bit_equal(y1, y2) && oracle::bit_equal(y1, y4) &&
                oracle::bit_equal(b1.coeff_grad, b2.coeff_grad) && oracle::bit_equal(b1.coeff_grad, b4.coeff_grad) &&
                oracle::bit_equal(b1.x_grad, b2.x_grad) && oracle::bit_equal(b1.x_grad, b4.x_grad);
    }
  }
  const bool ok = counts_ok && bits_ok && value_err <= 1e-5;
  return {ok, fmt("merge counters %s; partial+combine vs single pass %.2e (<= 1e-5); "
                  "bit-identical across runs and workers {1,4}: %s",
                  counts_ok ? "exact" : "MISMATCH", value_err, bits_ok ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------

Outcome layout_reordering() {
  bool roundtrip = true, stride = true, placement = true;
  std::size_t cases = 0;
  for (std::size_t I = 1; I <= 8; ++I)
    for (std::size_t O = 1; O <= 8; ++O)
      for (std::size_t F = 1; F <= 8; ++F) {
        ++cases;
        CoeffTensor jod(I, O, F, CoeffLayout::JOD);
        for (std::size_t i = 0; i < jod.size(); ++i) jod.data()[i] = float(i);
        const CoeffTensor doj = reorder_to_doj(jod);
        std::vector<int> seen(doj.size(), 0);
        for (std::size_t j = 0; j < I; ++j)
          for (std::size_t o = 0; o < O; ++o)
            for (std::size_t k = 0; k < F; ++k) {
              const std::size_t flat = (k * O + o) * I + j;
              placement = placement && doj.index(j, o, k) == flat &&
                          doj.data()[flat] == float((j * O + o) * F + k);
              ++seen[flat];
              if (j + 1 < I) stride = stride && doj.index(j + 1, o, k) - doj.index(j, o, k) == 1;
            }
        placement = placement && std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
        roundtrip = roundtrip && oracle::bit_equal(reorder_to_jod(doj), jod) && reorder_to_jod(doj) == jod;
      }

  // Random bit patterns, including NaN payloads and signed zeros.
  Rng rng(15);
  for (int inst = 0; inst < 50; ++inst) {
    CoeffTensor jod(draw(rng, 1, 70), draw(rng, 1, 70), draw(rng, 1, 25), CoeffLayout::JOD);
    for (float& v : jod.data()) {
      const auto bits = std::uint32_t(rng.next());
      std::memcpy(&v, &bits, 4);
    }
    roundtrip = roundtrip && oracle::bit_equal(reorder_to_jod(reorder_to_doj(jod)), jod);
  }
  const bool ok = roundtrip && stride && placement;
  return {ok, fmt("roundtrip bit-exact: %s; unit stride: %s; placement bijective: %s (%zu shapes <= 8, 50 random)",
                  roundtrip ? "yes" : "NO", stride ? "yes" : "NO", placement ? "yes" : "NO", cases)};
}

// ---------------------------------------------------------------------------

Outcome roofline_model() {
  const RooflineReport c1 = roofline(LayerConfig{128, 40, 256, 8, 4});
  const bool c1_ok = c1.flops == 23674880u && c1.bytes == 888832u &&
                     std::fabs(c1.intensity - 23674880.0 / 888832.0) <= 1e-9 && std::fabs(c1.intensity - 26.64) < 5e-3;
  Rng rng(16);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const LayerConfig c{draw(rng, 1, 4096), draw(rng, 1, 4096), draw(rng, 1, 4096), draw(rng, 0, 32),
                        rng.below(2) ? 8u : 4u};
    const RooflineReport r = roofline(c);
    const oracle::Roof o = oracle::roofline(c);
    const double di = std::fabs(r.intensity - double(o.intensity));
    worst = std::max(worst, di);
    const bool memory = o.intensity < (long double)kDefaultRidgeIntensity;
    if (oracle::u128(r.flops) != o.flops || oracle::u128(r.bytes) != o.bytes || di > 1e-9 ||
        (r.regime == Regime::MemoryBound) != memory)
      ++mismatches;
  }
  const bool ok = c1_ok && mismatches == 0;
  return {ok, fmt("Config 1 T=%llu S=%llu I=%.12f (expect 23674880, 888832, 26.6359...); "
                  "1000 random configs: %zu mismatches, max |dI| %.1e (<= 1e-9)",
                  (unsigned long long)c1.flops, (unsigned long long)c1.bytes, c1.intensity, mismatches, worst)};
}

// ---------------------------------------------------------------------------

Outcome convergence() {
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset data = synthetic_dataset("cheb2");
  TrainOptions opts;
  opts.epochs = 200;
  auto run = [&](BasisPath path) {
    KernelMode mode;
    mode.basis_path = path;
    const NetworkSpec spec = make_network_spec({1, 1}, 2, BasisKind::Chebyshev, mode);
    return network_train(spec, data, opts).final_loss;
  };
  const double exact = run(BasisPath::ExactRecurrence);
  const double lut = run(BasisPath::LutInterp);
  const double rel = std::fabs(lut - exact) / exact;
  const double secs = seconds_since(t0);
  const bool ok = exact < 1e-6 && lut < 1e-6 && rel <= 0.10 && secs < 60.0;
  return {ok, fmt("exact-mode MSE %.3e, LUT-mode MSE %.3e (< 1e-6); paired difference %.1f%% (<= 10%%); "
                  "%.2f s (< 60)",
                  exact, lut, 100.0 * rel, secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"oracle-equivalence", oracle_equivalence}, {"lut-fidelity", lut_fidelity},
      {"gradient-semantics", gradient_semantics}, {"two-stage-reduction", two_stage_reduction},
      {"layout-reordering", layout_reordering},   {"roofline", roofline_model},
      {"convergence", convergence},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("threw: ") + e.what()};
    }
    failed += r.passed ? 0 : 1;
    std::printf("%s  [%zu] %-20s %s\n", r.passed ? "PASS" : "FAIL", i + 1, criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", int(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
