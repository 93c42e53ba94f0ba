// SPDX-License-Identifier: Apache-2.0

#include "polykan/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

#include "parallel.hpp"
#include "polykan/errors.hpp"

namespace polykan {
namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_dims(const Matrix& x, const CoeffTensor& coeff, const LutTable& lut, const TileSchedule& sched) {
  if (x.cols() != coeff.d_in()) {
    throw std::invalid_argument("input has " + std::to_string(x.cols()) + " columns, coefficients expect D_in=" +
                                std::to_string(coeff.d_in()));
  }
  if (x.rows() == 0) throw std::invalid_argument("batch must be non-empty");
  if (sched.d_in() != coeff.d_in() || sched.d_out() != coeff.d_out()) {
    throw std::invalid_argument("tile schedule dimensions do not match the coefficients");
  }
  if (lut.features() != coeff.features()) {
    throw std::invalid_argument("LUT has " + std::to_string(lut.features()) + " features, coefficients have " +
                                std::to_string(coeff.features()));
  }
}

void check_finite(const Matrix& x) {
  for (std::size_t b = 0; b < x.rows(); ++b) {
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (!std::isfinite(x(b, j))) throw NumericError(b, j);
    }
  }
}

// Start offset and stride of coeff[., out, j0 + jj] as jj advances, for feature k.
struct CoeffRow {
  std::size_t base;
  std::size_t stride;
};

CoeffRow coeff_row(const CoeffTensor& c, std::size_t k, std::size_t out, std::size_t j0) {
  if (c.layout() == CoeffLayout::DOJ) return {doj_index(k, out, j0, c.d_out(), c.d_in()), 1};
  return {jod_index(j0, out, k, c.d_out(), c.features()), c.d_out() * c.features()};
}

// Batch rows expanded together, so one coefficient tile is reused across them.
constexpr std::size_t kRowBlock = 16;

// Per-worker tile scratch for up to kRowBlock batch rows: basis values (and
// slopes) as [row][feature][tile_in].
struct TileScratch {
  TileScratch(std::size_t features, std::size_t tile_in)
      : f(features), tile_in(tile_in), basis(kRowBlock * features * tile_in), dbasis(kRowBlock * features * tile_in),
        jacobian(kRowBlock * tile_in), row(tile_in), acc(kRowBlock * tile_in), exact(features), exact_d(features) {}

  float* basis_of(std::size_t r) { return basis.data() + r * f * tile_in; }
  float* dbasis_of(std::size_t r) { return dbasis.data() + r * f * tile_in; }
  float* jacobian_of(std::size_t r) { return jacobian.data() + r * tile_in; }
  float* acc_of(std::size_t r) { return acc.data() + r * tile_in; }

  std::size_t f;
  std::size_t tile_in;
  std::vector<float> basis;
  std::vector<float> dbasis;
  std::vector<float> jacobian;
  std::vector<float> row;
  std::vector<float> acc;
  std::vector<double> exact;
  std::vector<double> exact_d;
};

// Expands inputs x[b, j0 .. j0+n) into scratch row r. With `with_slopes`,
// also fills basis derivatives with respect to the normalized input and the
// tanh Jacobian factor.
void expand_tile(const LutTable& lut, const KernelMode& mode, std::span<const float> xrow, std::size_t j0,
                 std::size_t n, bool with_slopes, TileScratch& s, std::size_t r) {
  const std::size_t f = lut.features();
  const std::size_t tile_in = s.tile_in;
  const int degree = lut.degree();
  float* basis = s.basis_of(r);
  float* dbasis = s.dbasis_of(r);
  float* jacobian = s.jacobian_of(r);
  for (std::size_t jj = 0; jj < n; ++jj) {
    const double xt = std::tanh(static_cast<double>(xrow[j0 + jj]));
    if (mode.basis_path == BasisPath::LutInterp) {
      const LutCell cell = lut.locate(xt);
      const float frac = static_cast<float>(cell.frac);
      const float keep = 1.0f - frac;
      for (std::size_t k = 0; k < f; ++k) {
        const float left = lut.value(k, cell.index);
        const float right = lut.value(k, cell.index + 1);
        basis[k * tile_in + jj] = left * keep + right * frac;
      }
      if (with_slopes) {
        for (std::size_t k = 0; k < f; ++k) dbasis[k * tile_in + jj] = lut.slope(k, cell.index);
      }
    } else if (with_slopes) {
      eval_basis_with_derivative_into(lut.kind(), degree, xt, s.exact, s.exact_d);
      for (std::size_t k = 0; k < f; ++k) {
        basis[k * tile_in + jj] = static_cast<float>(s.exact[k]);
        dbasis[k * tile_in + jj] = static_cast<float>(s.exact_d[k]);
      }
    } else {
      eval_basis_into(lut.kind(), degree, xt, s.exact);
      for (std::size_t k = 0; k < f; ++k) basis[k * tile_in + jj] = static_cast<float>(s.exact[k]);
    }
    if (with_slopes) {
      jacobian[jj] = mode.include_tanh_jacobian ? static_cast<float>(1.0 - xt * xt) : 1.0f;
    }
  }
}

// Eight float lanes (GCC/Clang vector extension).
typedef float Lanes8 __attribute__((vector_size(32)));

inline Lanes8 load8(const float* p) {
  Lanes8 v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

inline void store8(float* p, Lanes8 v) { std::memcpy(p, &v, sizeof v); }

// Number of output-tile chunks per input tile: coarse enough that one task
// expands its inputs once for many output tiles, fine enough to feed workers.
std::size_t output_chunks(std::size_t other_tasks, std::size_t g_y, unsigned workers) {
  const std::size_t want = 4 * static_cast<std::size_t>(std::max(1u, workers));
  return std::clamp<std::size_t>(ceil_div(want, std::max<std::size_t>(other_tasks, 1)), 1, g_y);
}

// Lane sums of one output row over a tile: lane t accumulates
// coeff[k, out, j0 + t + 8m] * basis_k[t + 8m] over m and k. Reordered
// layout with eight lanes; OB outputs share each basis load.
template <std::size_t OB>
void lane_block(const float* const (&crow)[OB], std::size_t kstride, const float* basis, std::size_t tile_in,
                std::size_t f, std::size_t n, float (&lanes)[OB][8]) {
  Lanes8 acc[OB];
  for (std::size_t o = 0; o < OB; ++o) acc[o] = Lanes8{};
  const std::size_t full = n - n % 8;
  for (std::size_t m0 = 0; m0 < full; m0 += 8) {
    for (std::size_t k = 0; k < f; ++k) {
      const Lanes8 t = load8(basis + k * tile_in + m0);
      for (std::size_t o = 0; o < OB; ++o) acc[o] += load8(crow[o] + k * kstride + m0) * t;
    }
  }
  for (std::size_t o = 0; o < OB; ++o) std::memcpy(lanes[o], &acc[o], sizeof acc[o]);
  for (std::size_t k = 0; k < f; ++k) {
    const float* t = basis + k * tile_in;
    for (std::size_t o = 0; o < OB; ++o) {
      const float* c = crow[o] + k * kstride;
      for (std::size_t jj = full; jj < n; ++jj) lanes[o][jj - full] += c[jj] * t[jj];
    }
  }
}

template <std::size_t L>
float reduce_lanes(const float (&lanes)[L]) {
  float total = 0.0f;
  for (std::size_t l = 0; l < L; ++l) total += lanes[l];
  return total;
}

// Same lane partition for any layout and lane count.
float lane_sum_generic(const CoeffTensor& coeff, std::size_t out, std::size_t j0, const float* basis,
                       std::size_t tile_in, std::size_t n, std::size_t lane_x, std::vector<float>& lanes) {
  const std::size_t f = coeff.features();
  const CoeffRow r0 = coeff_row(coeff, 0, out, j0);
  const std::size_t ks = coeff.layout() == CoeffLayout::DOJ ? coeff.d_out() * coeff.d_in() : 1;
  const float* c = coeff.data().data() + r0.base;
  std::fill(lanes.begin(), lanes.end(), 0.0f);
  for (std::size_t m0 = 0; m0 < n; m0 += lane_x) {
    for (std::size_t l = 0; l < lane_x && m0 + l < n; ++l) {
      const std::size_t jj = m0 + l;
      const float* cj = c + jj * r0.stride;
      float sum = lanes[l];
      for (std::size_t k = 0; k < f; ++k) sum += cj[k * ks] * basis[k * tile_in + jj];
      lanes[l] = sum;
    }
  }
  float total = 0.0f;
  for (std::size_t l = 0; l < lane_x && l < n; ++l) total += lanes[l];
  return total;
}

// Reordered-layout backward of one output over a block of batch rows:
//   cg[k][jj]  += sum_r g[r] * t_{r,k}[jj]
//   acc_r[jj]  += g[r] * sum_{k >= 1} c_k[jj] * dt_{r,k}[jj]
void backward_block(const float* c, float* cg, std::size_t kstride, const float* g, std::size_t rows,
                    TileScratch& s, std::size_t n) {
  const std::size_t f = s.f;
  const std::size_t tile_in = s.tile_in;
  const std::size_t full = n - n % 8;
  for (std::size_t k = 0; k < f; ++k) {
    float* gk = cg + k * kstride;
    for (std::size_t m0 = 0; m0 < full; m0 += 8) {
      Lanes8 v = load8(gk + m0);
      for (std::size_t r = 0; r < rows; ++r) v += g[r] * load8(s.basis_of(r) + k * tile_in + m0);
      store8(gk + m0, v);
    }
    for (std::size_t jj = full; jj < n; ++jj) {
      float v = gk[jj];
      for (std::size_t r = 0; r < rows; ++r) v += g[r] * s.basis_of(r)[k * tile_in + jj];
      gk[jj] = v;
    }
  }
  // d >= 1: the constant feature has zero derivative.
  for (std::size_t r = 0; r < rows; ++r) {
    const float* dt = s.dbasis_of(r);
    float* acc = s.acc_of(r);
    for (std::size_t m0 = 0; m0 < full; m0 += 8) {
      Lanes8 sum{};
      for (std::size_t k = 1; k < f; ++k) sum += load8(c + k * kstride + m0) * load8(dt + k * tile_in + m0);
      store8(acc + m0, load8(acc + m0) + g[r] * sum);
    }
    for (std::size_t jj = full; jj < n; ++jj) {
      float sum = 0.0f;
      for (std::size_t k = 1; k < f; ++k) sum += c[k * kstride + jj] * dt[k * tile_in + jj];
      acc[jj] += g[r] * sum;
    }
  }
}

// Backward contributions of one output for one batch row, any layout
// (feature stride ks, input stride js):
//   cg[k][jj]  += g * t_k[jj]
//   row[jj]     = sum_{k >= 1} c_k[jj] * dt_k[jj]
void backward_row(const float* c, float* cg, std::size_t ks, std::size_t js, float g, const float* basis,
                  const float* dbasis, std::size_t tile_in, std::size_t f, std::size_t n, float* row) {
  for (std::size_t jj = 0; jj < n; ++jj) {
    float* gj = cg + jj * js;
    const float* cj = c + jj * js;
    for (std::size_t k = 0; k < f; ++k) gj[k * ks] += g * basis[k * tile_in + jj];
    float sum = 0.0f;
    // d >= 1: the constant feature has zero derivative.
    for (std::size_t k = 1; k < f; ++k) sum += cj[k * ks] * dbasis[k * tile_in + jj];
    row[jj] = sum;
  }
}

}  // namespace

TileSchedule::TileSchedule(std::size_t d_in, std::size_t d_out, TileParams params)
    : d_in_(d_in), d_out_(d_out), params_(params) {
  if (d_in == 0 || d_out == 0) {
    throw std::invalid_argument("layer dimensions must be positive (D_in=" + std::to_string(d_in) +
                                ", D_out=" + std::to_string(d_out) + ")");
  }
  if (params.tile_in == 0 || params.tile_out == 0 || params.lane_x == 0) {
    throw std::invalid_argument("tile sizes and lane counts must be positive");
  }
  g_x_ = ceil_div(d_in, params.tile_in);
  g_y_ = ceil_div(d_out, params.tile_out);
}

PartialBuffer::PartialBuffer(const TileSchedule& sched, std::size_t batch, bool track_writes)
    : g_x_(sched.g_x()),
      g_y_(sched.g_y()),
      batch_(batch),
      tile_out_(sched.tile_out()),
      data_(g_x_ * g_y_ * batch * tile_out_, 0.0f) {
  if (track_writes) {
    writes_ = std::make_unique<std::atomic<std::uint32_t>[]>(data_.size());
    reset_write_counts();
  }
}

std::vector<std::uint32_t> PartialBuffer::write_counts() const {
  std::vector<std::uint32_t> out;
  if (!writes_) return out;
  out.resize(data_.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = writes_[i].load(std::memory_order_relaxed);
  return out;
}

void PartialBuffer::reset_write_counts() {
  if (!writes_) return;
  for (std::size_t i = 0; i < data_.size(); ++i) writes_[i].store(0, std::memory_order_relaxed);
}

void forward_partial(const Matrix& x, const CoeffTensor& coeff, const LutTable& lut, const TileSchedule& sched,
                     const KernelMode& mode, PartialBuffer& out, const ExecOptions& exec) {
  check_dims(x, coeff, lut, sched);
  const std::size_t batch = x.rows();
  if (out.batch() != batch || out.g_x() != sched.g_x() || out.g_y() != sched.g_y() ||
      out.tile_out() != sched.tile_out()) {
    throw std::invalid_argument("partial buffer does not match schedule and batch");
  }
  if (mode.validate_finite) check_finite(x);

  const std::size_t d_in = coeff.d_in();
  const std::size_t d_out = coeff.d_out();
  const std::size_t f = coeff.features();
  const std::size_t tile_in = sched.tile_in();
  const std::size_t tile_out = sched.tile_out();
  const std::size_t lane_x = sched.lane_x();
  const std::size_t g_x = sched.g_x();
  const float* cdata = coeff.data().data();
  float* pdata = out.data().data();

  // Tasks ordered (chunk, tileI, row block) with the row block fastest. A
  // task expands its rows once, then visits the output tiles of its chunk;
  // every partial slot is still produced by exactly one (tile pair, b, lane row).
  const std::size_t g_y = sched.g_y();
  const std::size_t blocks = ceil_div(batch, kRowBlock);
  const std::size_t chunks = output_chunks(g_x * blocks, g_y, exec.workers);
  const std::size_t per_chunk = ceil_div(g_y, chunks);
  const std::size_t tasks = chunks * g_x * blocks;
  const bool fast = coeff.layout() == CoeffLayout::DOJ && lane_x == 8;
  const std::size_t kstride = d_out * d_in;
  std::vector<std::uint64_t> stores(std::max(1u, exec.workers), 0);

  detail::parallel_for(tasks, exec.workers, [&](std::size_t begin, std::size_t end, unsigned worker) {
    TileScratch s(f, tile_in);
    std::vector<float> lanes(lane_x);
    std::uint64_t local_stores = 0;
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t block = task % blocks;
      const std::size_t tile_i = (task / blocks) % g_x;
      const std::size_t chunk = task / (blocks * g_x);
      const std::size_t in_start = tile_i * tile_in;
      const std::size_t n_in = std::min(in_start + tile_in, d_in) - in_start;
      const std::size_t b0 = block * kRowBlock;
      const std::size_t rows = std::min(batch, b0 + kRowBlock) - b0;

      for (std::size_t r = 0; r < rows; ++r) expand_tile(lut, mode, x.row(b0 + r), in_start, n_in, false, s, r);

      const std::size_t tile_o_end = std::min(g_y, (chunk + 1) * per_chunk);
      for (std::size_t tile_o = chunk * per_chunk; tile_o < tile_o_end; ++tile_o) {
        const std::size_t out_start = tile_o * tile_out;
        const std::size_t out_end = std::min(out_start + tile_out, d_out);
        auto store = [&](std::size_t b, std::size_t out_idx, float total) {
          const std::size_t slot = out.slot(tile_o, tile_i, b, out_idx - out_start);
          pdata[slot] = total;
          out.record_write(slot);
          ++local_stores;
        };
        std::size_t out_idx = out_start;
        if (fast) {
          for (; out_idx + 4 <= out_end; out_idx += 4) {
            const float* const crow[4] = {cdata + doj_index(0, out_idx, in_start, d_out, d_in),
                                          cdata + doj_index(0, out_idx + 1, in_start, d_out, d_in),
                                          cdata + doj_index(0, out_idx + 2, in_start, d_out, d_in),
                                          cdata + doj_index(0, out_idx + 3, in_start, d_out, d_in)};
            for (std::size_t r = 0; r < rows; ++r) {
              float acc[4][8];
              lane_block<4>(crow, kstride, s.basis_of(r), tile_in, f, n_in, acc);
              for (std::size_t o = 0; o < 4; ++o) store(b0 + r, out_idx + o, reduce_lanes(acc[o]));
            }
          }
          for (; out_idx < out_end; ++out_idx) {
            const float* const crow[1] = {cdata + doj_index(0, out_idx, in_start, d_out, d_in)};
            for (std::size_t r = 0; r < rows; ++r) {
              float acc[1][8];
              lane_block<1>(crow, kstride, s.basis_of(r), tile_in, f, n_in, acc);
              store(b0 + r, out_idx, reduce_lanes(acc[0]));
            }
          }
        } else {
          for (; out_idx < out_end; ++out_idx) {
            for (std::size_t r = 0; r < rows; ++r) {
              store(b0 + r, out_idx,
                    lane_sum_generic(coeff, out_idx, in_start, s.basis_of(r), tile_in, n_in, lane_x, lanes));
            }
          }
        }
      }
    }
    stores[worker] = local_stores;
  });

  if (exec.counters) {
    for (auto v : stores) exec.counters->partial_stores += v;
    if (out.tracking()) {
      for (auto c : out.write_counts()) {
        if (c > 1) exec.counters->forward_atomic_updates += c - 1;
      }
    }
  }
}

Matrix combine(const PartialBuffer& partial, const TileSchedule& sched, std::span<const float> bias,
               const ExecOptions& exec) {
  const std::size_t batch = partial.batch();
  const std::size_t d_out = sched.d_out();
  if (!bias.empty() && bias.size() != d_out) {
    throw std::invalid_argument("bias has " + std::to_string(bias.size()) + " entries, expected " +
                                std::to_string(d_out));
  }
  if (partial.g_x() != sched.g_x() || partial.g_y() != sched.g_y() || partial.tile_out() != sched.tile_out()) {
    throw std::invalid_argument("partial buffer does not match schedule");
  }
  Matrix y(batch, d_out);
  const auto pdata = partial.data();
  const std::size_t tile_out = sched.tile_out();
  const std::size_t g_x = sched.g_x();

  detail::parallel_for(batch, exec.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t b = begin; b < end; ++b) {
      for (std::size_t o = 0; o < d_out; ++o) {
        const std::size_t tile_o = o / tile_out;
        const std::size_t t_y = o % tile_out;
        float sum = 0.0f;
        for (std::size_t tile_i = 0; tile_i < g_x; ++tile_i) sum += pdata[partial.slot(tile_o, tile_i, b, t_y)];
        if (!bias.empty()) sum += bias[o];
        y(b, o) = sum;
      }
    }
  });
  if (exec.counters) exec.counters->combine_stores += static_cast<std::uint64_t>(batch) * d_out;
  return y;
}

Matrix fused_forward(const Matrix& x, const CoeffTensor& coeff, const LutTable& lut, const TileSchedule& sched,
                     const KernelMode& mode, std::span<const float> bias, const ExecOptions& exec) {
  PartialBuffer partial(sched, x.rows());
  forward_partial(x, coeff, lut, sched, mode, partial, exec);
  return combine(partial, sched, bias, exec);
}

BackwardResult backward_fused(const Matrix& x, const CoeffTensor& coeff, const Matrix& dy, const LutTable& lut,
                              const TileSchedule& sched, const KernelMode& mode, const ExecOptions& exec) {
  check_dims(x, coeff, lut, sched);
  if (dy.rows() != x.rows() || dy.cols() != coeff.d_out()) {
    throw std::invalid_argument("dY must be " + std::to_string(x.rows()) + "x" + std::to_string(coeff.d_out()));
  }
  if (mode.validate_finite) check_finite(x);

  const std::size_t batch = x.rows();
  const std::size_t d_in = coeff.d_in();
  const std::size_t d_out = coeff.d_out();
  const std::size_t f = coeff.features();
  const std::size_t tile_in = sched.tile_in();
  const std::size_t tile_out = sched.tile_out();
  const std::size_t g_x = sched.g_x();
  const std::size_t g_y = sched.g_y();

  BackwardResult result{CoeffTensor(d_in, d_out, f, coeff.layout()), Matrix(batch, d_in)};
  // Per-output-tile input-gradient contributions [tileO][b][j].
  std::vector<float> x_part(g_y * batch * d_in, 0.0f);
  const float* cdata = coeff.data().data();
  float* gdata = result.coeff_grad.data().data();

  // A task owns coeff_grad[., out tiles of its chunk, in tile] and the
  // matching x_part slices; batch rows are accumulated in ascending order,
  // so results do not depend on how tasks are spread over workers.
  const std::size_t chunks = output_chunks(g_x, g_y, exec.workers);
  const std::size_t per_chunk = ceil_div(g_y, chunks);
  const bool fast = coeff.layout() == CoeffLayout::DOJ;
  detail::parallel_for(g_x * chunks, exec.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    TileScratch s(f, tile_in);
    for (std::size_t task = begin; task < end; ++task) {
      const std::size_t tile_i = task % g_x;
      const std::size_t chunk = task / g_x;
      const std::size_t in_start = tile_i * tile_in;
      const std::size_t n_in = std::min(in_start + tile_in, d_in) - in_start;
      const std::size_t tile_o_end = std::min(g_y, (chunk + 1) * per_chunk);

      for (std::size_t b0 = 0; b0 < batch; b0 += kRowBlock) {
        const std::size_t rows = std::min(batch, b0 + kRowBlock) - b0;
        for (std::size_t r = 0; r < rows; ++r) expand_tile(lut, mode, x.row(b0 + r), in_start, n_in, true, s, r);
        for (std::size_t tile_o = chunk * per_chunk; tile_o < tile_o_end; ++tile_o) {
          const std::size_t out_start = tile_o * tile_out;
          const std::size_t out_end = std::min(out_start + tile_out, d_out);
          std::fill_n(s.acc.begin(), rows * tile_in, 0.0f);
          if (fast) {
            float g[kRowBlock];
            for (std::size_t out_idx = out_start; out_idx < out_end; ++out_idx) {
              for (std::size_t r = 0; r < rows; ++r) g[r] = dy(b0 + r, out_idx);
              const std::size_t base = doj_index(0, out_idx, in_start, d_out, d_in);
              backward_block(cdata + base, gdata + base, d_out * d_in, g, rows, s, n_in);
            }
          } else {
            for (std::size_t r = 0; r < rows; ++r) {
              float* acc = s.acc_of(r);
              for (std::size_t out_idx = out_start; out_idx < out_end; ++out_idx) {
                const float g = dy(b0 + r, out_idx);
                const CoeffRow r0 = coeff_row(coeff, 0, out_idx, in_start);
                backward_row(cdata + r0.base, gdata + r0.base, 1, r0.stride, g, s.basis_of(r), s.dbasis_of(r),
                                tile_in, f, n_in, s.row.data());
                // Reduce over output lanes in lane order.
                for (std::size_t jj = 0; jj < n_in; ++jj) acc[jj] += g * s.row[jj];
              }
            }
          }
          for (std::size_t r = 0; r < rows; ++r) {
            const float* acc = s.acc_of(r);
            const float* jac = s.jacobian_of(r);
            float* dst = x_part.data() + (tile_o * batch + b0 + r) * d_in + in_start;
            for (std::size_t jj = 0; jj < n_in; ++jj) dst[jj] = acc[jj] * jac[jj];
          }
        }
      }
    }
  });

  // One ordered merge per (b, j) per output tile.
  std::vector<std::uint64_t> merges(batch, 0);
  detail::parallel_for(batch, exec.workers, [&](std::size_t begin, std::size_t end, unsigned) {
    for (std::size_t b = begin; b < end; ++b) {
      for (std::size_t j = 0; j < d_in; ++j) {
        float sum = 0.0f;
        for (std::size_t tile_o = 0; tile_o < g_y; ++tile_o) {
          sum += x_part[(tile_o * batch + b) * d_in + j];
          ++merges[b];
        }
        result.x_grad(b, j) = sum;
      }
    }
  });
  if (exec.counters) {
    for (auto m : merges) exec.counters->backward_x_merges += m;
  }
  return result;
}

AtomicCounts count_atomics(std::size_t batch, std::size_t d_in, std::size_t d_out, const TileSchedule& sched) {
  if (batch == 0 || d_in == 0 || d_out == 0) throw std::invalid_argument("count_atomics needs positive dims");
  const std::uint64_t b = batch;
  const std::uint64_t g_x = ceil_div(d_in, sched.tile_in());
  const std::uint64_t g_y = ceil_div(d_out, sched.tile_out());
  return {b * d_out * g_x, 0, b * d_in * d_out, b * d_in * g_y};
}

}  // namespace polykan
