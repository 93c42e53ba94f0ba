// SPDX-License-Identifier: Apache-2.0
//
// KAN layers, network composition, losses, Adam, and the training loop.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "polykan/basis.hpp"
#include "polykan/data.hpp"
#include "polykan/kernels.hpp"
#include "polykan/lut.hpp"
#include "polykan/tensor.hpp"

namespace polykan {

struct LayerSpec {
  std::size_t d_in = 1;
  std::size_t d_out = 1;
  int degree = 1;
  BasisKind kind = BasisKind::Chebyshev;
  KernelMode mode{};
  bool has_bias = true;

  std::size_t features() const { return feature_count(kind, degree); }
};

enum class LossKind { MSE, CrossEntropy, RMSLE };

std::string_view to_string(LossKind loss);
LossKind parse_loss_kind(std::string_view name);

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  LossKind loss = LossKind::MSE;
};

/// Throws std::invalid_argument on empty networks, zero dims, negative
/// degrees, or widths that do not chain.
void validate(const NetworkSpec& spec);

/// Builds a chained spec from widths such as {40, 256, 256, 12}; every layer
/// gets the same basis, degree, and mode.
NetworkSpec make_network_spec(const std::vector<std::size_t>& widths, int degree, BasisKind kind,
                              const KernelMode& mode, LossKind loss = LossKind::MSE, bool has_bias = true);

struct LayerParams {
  CoeffTensor coeff;  // DOJ
  std::vector<float> bias;
};

/// Coefficients ~ U(-s, s) with s = 1 / sqrt(d_in * features); bias zero.
LayerParams init_params(const LayerSpec& spec, std::uint64_t seed);

struct RuntimeOptions {
  TileParams tiles{};
  std::size_t lut_size = kDefaultLutSize;
  unsigned workers = 1;
};

/// Process-wide cache of built tables keyed by (kind, degree, size).
std::shared_ptr<const LutTable> shared_lut(BasisKind kind, int degree, std::size_t size);

class KanLayer {
 public:
  KanLayer(LayerSpec spec, LayerParams params, const RuntimeOptions& rt = {});

  const LayerSpec& spec() const noexcept { return spec_; }
  const LayerParams& params() const noexcept { return params_; }
  LayerParams& params() noexcept { return params_; }
  const LutTable& lut() const noexcept { return *lut_; }
  const TileSchedule& schedule() const noexcept { return sched_; }

  /// Caches x for the next backward call.
  Matrix forward(const Matrix& x);
  /// Stores parameter gradients and returns dL/dx.
  Matrix backward(const Matrix& dy);
  /// Forward without touching the cache.
  Matrix infer(const Matrix& x) const;

  const CoeffTensor& coeff_grad() const noexcept { return coeff_grad_; }
  const std::vector<float>& bias_grad() const noexcept { return bias_grad_; }

 private:
  LayerSpec spec_;
  LayerParams params_;
  std::shared_ptr<const LutTable> lut_;
  TileSchedule sched_;
  unsigned workers_;
  Matrix cached_x_;
  bool has_cache_ = false;
  CoeffTensor coeff_grad_;
  std::vector<float> bias_grad_;
};

/// Stateless single-layer forward.
Matrix layer_forward(const LayerSpec& spec, const LayerParams& params, const Matrix& x,
                     const RuntimeOptions& rt = {});

struct LossValue {
  double loss;
  Matrix grad;  // dL/dy
};

/// Mean loss over the batch. CrossEntropy reads integer class labels from
/// the single target column. RMSLE expects targets already mapped by log1p
/// and returns the root of the mean squared error (its gradient is that of
/// the mean squared error).
LossValue compute_loss(LossKind kind, const Matrix& y, const Matrix& targets);

class Network {
 public:
  Network(NetworkSpec spec, std::uint64_t seed, const RuntimeOptions& rt = {});
  Network(NetworkSpec spec, std::vector<LayerParams> params, const RuntimeOptions& rt = {});

  const NetworkSpec& spec() const noexcept { return spec_; }
  const RuntimeOptions& runtime() const noexcept { return rt_; }
  std::size_t layer_count() const noexcept { return layers_.size(); }
  KanLayer& layer(std::size_t i) { return layers_.at(i); }
  const KanLayer& layer(std::size_t i) const { return layers_.at(i); }

  Matrix forward(const Matrix& x);
  Matrix infer(const Matrix& x) const;
  /// Backpropagates dL/dy through every layer.
  void backward(const Matrix& dy);

 private:
  NetworkSpec spec_;
  RuntimeOptions rt_;
  std::vector<KanLayer> layers_;
};

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moments for every coefficient and bias of a network.
class Adam {
 public:
  Adam(const Network& net, AdamParams hp);

  const AdamParams& hyper() const noexcept { return hp_; }
  std::uint64_t steps() const noexcept { return step_; }
  /// Applies the gradients currently stored in the layers.
  void step(Network& net);

 private:
  AdamParams hp_;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct TrainOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  AdamParams adam{};
  std::uint64_t seed = 0;
};

struct EpochRecord {
  std::size_t epoch;
  double loss;  // sample-weighted mean of the batch losses seen during the epoch
  double forward_s;
  double backward_s;
  double step_s;
};

struct TrainingTrace {
  std::vector<EpochRecord> epochs;
  double final_loss = 0.0;  // full-dataset loss after the last epoch
};

/// Raised when a batch loss is non-finite (1-based epoch and batch).
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t epoch, std::size_t batch);
  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

/// Targets as the loss expects them (log1p for RMSLE, unchanged otherwise).
Matrix prepare_targets(LossKind loss, const Matrix& targets);
double evaluate_loss(const Network& net, const Dataset& data);

/// Trains in place with a seeded per-epoch shuffle.
TrainingTrace network_train(Network& net, const Dataset& data, const TrainOptions& opts);
TrainingTrace network_train(const NetworkSpec& spec, const Dataset& data, const TrainOptions& opts,
                            const RuntimeOptions& rt = {});

/// Directory with manifest.json plus one PKCK file per layer.
void save_network(const Network& net, const std::filesystem::path& dir);
Network load_network(const std::filesystem::path& dir, const RuntimeOptions& rt = {});

}  // namespace polykan
