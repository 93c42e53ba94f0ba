// SPDX-License-Identifier: Apache-2.0
//
// Fused KAN layer kernels with output-aligned 2D tiling and a two-stage
// (Partial + Combine) reduction, plus unfused reference implementations.
//
// Work is split into tiles of TILE_IN inputs x TILE_OUT outputs. Within a
// tile, each of the TILE_OUT lane rows owns one output index; the lane_x
// lanes of a row stride across the tile's inputs. On the host a lane group
// is an inner loop, tile-local scratch replaces shared memory, and every
// cross-tile accumulation is an ordered merge instead of an atomic add, so
// results do not depend on the number of workers.

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "polykan/basis.hpp"
#include "polykan/lut.hpp"
#include "polykan/tensor.hpp"

namespace polykan {

struct TileParams {
  std::size_t tile_in = 64;
  std::size_t tile_out = 32;
  std::size_t lane_x = 8;
};

class TileSchedule {
 public:
  /// Throws std::invalid_argument for zero dimensions or zero tile/lane sizes.
  TileSchedule(std::size_t d_in, std::size_t d_out, TileParams params = {});

  std::size_t d_in() const noexcept { return d_in_; }
  std::size_t d_out() const noexcept { return d_out_; }
  std::size_t tile_in() const noexcept { return params_.tile_in; }
  std::size_t tile_out() const noexcept { return params_.tile_out; }
  std::size_t lane_x() const noexcept { return params_.lane_x; }
  /// One output lane per tile row.
  std::size_t lane_y() const noexcept { return params_.tile_out; }
  std::size_t g_x() const noexcept { return g_x_; }
  std::size_t g_y() const noexcept { return g_y_; }
  const TileParams& params() const noexcept { return params_; }

 private:
  std::size_t d_in_;
  std::size_t d_out_;
  TileParams params_;
  std::size_t g_x_;
  std::size_t g_y_;
};

/// Workspace of the Partial stage, one slot per (tile pair, batch row, lane row).
class PartialBuffer {
 public:
  /// With `track_writes`, every store is counted per slot.
  PartialBuffer(const TileSchedule& sched, std::size_t batch, bool track_writes = false);

  std::size_t g_x() const noexcept { return g_x_; }
  std::size_t g_y() const noexcept { return g_y_; }
  std::size_t batch() const noexcept { return batch_; }
  std::size_t tile_out() const noexcept { return tile_out_; }

  std::size_t slot(std::size_t tile_o, std::size_t tile_i, std::size_t b, std::size_t t_y) const noexcept {
    return (tile_o * g_x_ + tile_i) * batch_ * tile_out_ + b * tile_out_ + t_y;
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool tracking() const noexcept { return writes_ != nullptr; }
  /// Per-slot store counts since construction or the last reset.
  std::vector<std::uint32_t> write_counts() const;
  void reset_write_counts();
  void record_write(std::size_t slot) noexcept {
    if (writes_) writes_[slot].fetch_add(1, std::memory_order_relaxed);
  }

 private:
  std::size_t g_x_;
  std::size_t g_y_;
  std::size_t batch_;
  std::size_t tile_out_;
  std::vector<float> data_;
  std::unique_ptr<std::atomic<std::uint32_t>[]> writes_;
};

enum class BasisPath { LutInterp, ExactRecurrence };

struct KernelMode {
  BasisPath basis_path = BasisPath::LutInterp;
  /// Multiply input gradients by d tanh / dx = 1 - tanh^2. Off reproduces
  /// the gradient of the basis with respect to the normalized input.
  bool include_tanh_jacobian = true;
  /// Reject non-finite inputs with NumericError before launching.
  bool validate_finite = false;
};

/// Instrumentation accumulated across kernel calls.
struct KernelCounters {
  /// Read-modify-write updates to locations shared between forward tasks.
  std::uint64_t forward_atomic_updates = 0;
  std::uint64_t partial_stores = 0;
  std::uint64_t combine_stores = 0;
  /// Ordered merges of per-output-tile input-gradient contributions.
  std::uint64_t backward_x_merges = 0;
};

struct ExecOptions {
  unsigned workers = 1;
  KernelCounters* counters = nullptr;
};

struct BackwardResult {
  CoeffTensor coeff_grad;
  Matrix x_grad;
};

/// Partial stage. The table supplies the basis kind and degree in both
/// modes; its samples are only read on the LUT path. DOJ coefficients are
/// the intended layout; JOD is accepted for layout ablation benchmarks.
void forward_partial(const Matrix& x, const CoeffTensor& coeff, const LutTable& lut,
                     const TileSchedule& sched, const KernelMode& mode, PartialBuffer& out,
                     const ExecOptions& exec = {});

/// Combine stage: y[b, o] = sum over input tiles in ascending order, plus bias.
/// `bias` is empty or holds D_out entries.
Matrix combine(const PartialBuffer& partial, const TileSchedule& sched, std::span<const float> bias = {},
               const ExecOptions& exec = {});

/// forward_partial followed by combine.
Matrix fused_forward(const Matrix& x, const CoeffTensor& coeff, const LutTable& lut,
                     const TileSchedule& sched, const KernelMode& mode, std::span<const float> bias = {},
                     const ExecOptions& exec = {});

/// Coefficient and input gradients for upstream gradient dY. The coefficient
/// gradient is returned in the layout of `coeff`.
BackwardResult backward_fused(const Matrix& x, const CoeffTensor& coeff, const Matrix& dy,
                              const LutTable& lut, const TileSchedule& sched, const KernelMode& mode,
                              const ExecOptions& exec = {});

enum class ReferencePath { Trig, Recurrence, Lut };

struct ReferenceOptions {
  BasisKind kind = BasisKind::Chebyshev;
  ReferencePath path = ReferencePath::Recurrence;
  const LutTable* lut = nullptr;  // required for ReferencePath::Lut
  bool include_tanh_jacobian = true;
  unsigned workers = 1;
};

/// Unfused, untiled layer: materializes the basis tensor in double precision,
/// then contracts it with JOD coefficients.
Matrix reference_forward(const Matrix& x, const CoeffTensor& coeff, const ReferenceOptions& opts = {},
                         std::span<const float> bias = {});
std::vector<double> reference_forward_f64(const Matrix& x, const CoeffTensor& coeff,
                                          const ReferenceOptions& opts = {}, std::span<const float> bias = {});

/// Unfused backward with analytic derivatives (Trig, Recurrence) or cell
/// slopes (Lut). Coefficient gradient in JOD layout.
BackwardResult reference_backward(const Matrix& x, const CoeffTensor& coeff, const Matrix& dy,
                                  const ReferenceOptions& opts = {});

struct AtomicCounts {
  std::uint64_t fwd_baseline;
  std::uint64_t fwd_ours;
  std::uint64_t bwd_x_naive;
  std::uint64_t bwd_x_ours;
};

/// Closed-form update counts of an atomic-write design versus this one.
AtomicCounts count_atomics(std::size_t batch, std::size_t d_in, std::size_t d_out, const TileSchedule& sched);

}  // namespace polykan
