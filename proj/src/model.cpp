// SPDX-License-Identifier: Apache-2.0

#include "polykan/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "polykan/errors.hpp"
#include "polykan/rng.hpp"

namespace polykan {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
  Matrix out(rows.size(), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = m.row(rows[i]);
    std::copy(src.begin(), src.end(), out.data().begin() + static_cast<std::ptrdiff_t>(i * m.cols()));
  }
  return out;
}

std::size_t output_width(const NetworkSpec& spec) { return spec.layers.back().d_out; }

void check_targets(const NetworkSpec& spec, const Dataset& data) {
  if (data.size() == 0) throw std::invalid_argument("dataset is empty");
  if (data.features.cols() != spec.layers.front().d_in) {
    throw std::invalid_argument("dataset has " + std::to_string(data.features.cols()) +
                                " features, first layer expects " + std::to_string(spec.layers.front().d_in));
  }
  if (spec.loss != LossKind::CrossEntropy && data.targets.cols() != output_width(spec)) {
    throw std::invalid_argument("target width does not match the network output");
  }
}

}  // namespace

std::string_view to_string(LossKind loss) {
  switch (loss) {
    case LossKind::MSE: return "mse";
    case LossKind::CrossEntropy: return "cross-entropy";
    case LossKind::RMSLE: return "rmsle";
  }
  return "?";
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "mse") return LossKind::MSE;
  if (name == "cross-entropy" || name == "ce") return LossKind::CrossEntropy;
  if (name == "rmsle") return LossKind::RMSLE;
  throw std::invalid_argument("unknown loss '" + std::string(name) + "'");
}

void validate(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw std::invalid_argument("network needs at least one layer");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    if (l.d_in == 0 || l.d_out == 0) throw std::invalid_argument("layer " + std::to_string(i) + " has a zero dimension");
    if (l.degree < 0) throw std::invalid_argument("layer " + std::to_string(i) + " has a negative degree");
    if (i > 0 && spec.layers[i - 1].d_out != l.d_in) {
      throw std::invalid_argument("layer " + std::to_string(i) + " input width " + std::to_string(l.d_in) +
                                  " does not match previous output width " +
                                  std::to_string(spec.layers[i - 1].d_out));
    }
  }
}

NetworkSpec make_network_spec(const std::vector<std::size_t>& widths, int degree, BasisKind kind,
                              const KernelMode& mode, LossKind loss, bool has_bias) {
  if (widths.size() < 2) throw std::invalid_argument("architecture needs at least two widths");
  NetworkSpec spec;
  spec.loss = loss;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    spec.layers.push_back({widths[i], widths[i + 1], degree, kind, mode, has_bias});
  }
  validate(spec);
  return spec;
}

LayerParams init_params(const LayerSpec& spec, std::uint64_t seed) {
  const std::size_t f = spec.features();
  const double s = 1.0 / std::sqrt(static_cast<double>(spec.d_in * f));
  CoeffTensor jod(spec.d_in, spec.d_out, f, CoeffLayout::JOD);
  Rng rng(seed);
  for (auto& w : jod.data()) w = static_cast<float>(rng.uniform(-s, s));
  return {reorder_to_doj(jod), std::vector<float>(spec.has_bias ? spec.d_out : 0, 0.0f)};
}

std::shared_ptr<const LutTable> shared_lut(BasisKind kind, int degree, std::size_t size) {
  static std::mutex mutex;
  static std::map<std::tuple<BasisKind, int, std::size_t>, std::shared_ptr<const LutTable>> cache;
  const std::lock_guard lock(mutex);
  auto& slot = cache[{kind, degree, size}];
  if (!slot) slot = std::make_shared<const LutTable>(LutTable::build(kind, degree, size));
  return slot;
}

// --- KanLayer ---------------------------------------------------------------

KanLayer::KanLayer(LayerSpec spec, LayerParams params, const RuntimeOptions& rt)
    : spec_(spec),
      params_(std::move(params)),
      lut_(shared_lut(spec.kind, spec.degree,
                      spec.mode.basis_path == BasisPath::LutInterp ? rt.lut_size : std::size_t{2})),
      sched_(spec.d_in, spec.d_out, rt.tiles),
      workers_(rt.workers) {
  if (params_.coeff.layout() != CoeffLayout::DOJ) params_.coeff = reorder_to_doj(params_.coeff);
  const auto& c = params_.coeff;
  if (c.d_in() != spec_.d_in || c.d_out() != spec_.d_out || c.features() != spec_.features()) {
    throw std::invalid_argument("layer parameters do not match the layer spec");
  }
  if (params_.bias.size() != (spec_.has_bias ? spec_.d_out : 0)) {
    throw std::invalid_argument("bias length does not match the layer spec");
  }
}

Matrix KanLayer::infer(const Matrix& x) const {
  return fused_forward(x, params_.coeff, *lut_, sched_, spec_.mode, params_.bias, {workers_, nullptr});
}

Matrix KanLayer::forward(const Matrix& x) {
  Matrix y = infer(x);
  cached_x_ = x;
  has_cache_ = true;
  return y;
}

Matrix KanLayer::backward(const Matrix& dy) {
  if (!has_cache_) throw std::logic_error("backward called without a cached forward input");
  BackwardResult r = backward_fused(cached_x_, params_.coeff, dy, *lut_, sched_, spec_.mode, {workers_, nullptr});
  coeff_grad_ = std::move(r.coeff_grad);
  bias_grad_.assign(params_.bias.size(), 0.0f);
  for (std::size_t o = 0; o < bias_grad_.size(); ++o) {
    double sum = 0.0;
    for (std::size_t b = 0; b < dy.rows(); ++b) sum += dy(b, o);
    bias_grad_[o] = static_cast<float>(sum);
  }
  return std::move(r.x_grad);
}

Matrix layer_forward(const LayerSpec& spec, const LayerParams& params, const Matrix& x, const RuntimeOptions& rt) {
  return KanLayer(spec, params, rt).infer(x);
}

// --- Losses -------------------------------------------------------------------

LossValue compute_loss(LossKind kind, const Matrix& y, const Matrix& targets) {
  const std::size_t n = y.rows();
  const std::size_t m = y.cols();
  if (targets.rows() != n) throw std::invalid_argument("target rows do not match predictions");
  Matrix grad(n, m);
  if (kind == LossKind::CrossEntropy) {
    if (targets.cols() != 1) throw std::invalid_argument("cross-entropy expects one label column");
    double total = 0.0;
    std::vector<double> p(m);
    for (std::size_t b = 0; b < n; ++b) {
      const double label = targets(b, 0);
      if (!(label >= 0.0) || label >= static_cast<double>(m) || label != std::floor(label)) {
        throw std::invalid_argument("class label " + std::to_string(label) + " outside [0, " + std::to_string(m) + ")");
      }
      const auto cls = static_cast<std::size_t>(label);
      double peak = y(b, 0);
      for (std::size_t o = 1; o < m; ++o) peak = std::max(peak, static_cast<double>(y(b, o)));
      double z = 0.0;
      for (std::size_t o = 0; o < m; ++o) z += (p[o] = std::exp(y(b, o) - peak));
      total += std::log(z) - (y(b, cls) - peak);
      for (std::size_t o = 0; o < m; ++o) {
        grad(b, o) = static_cast<float>((p[o] / z - (o == cls ? 1.0 : 0.0)) / static_cast<double>(n));
      }
    }
    return {total / static_cast<double>(n), std::move(grad)};
  }

  if (targets.cols() != m) throw std::invalid_argument("target width does not match predictions");
  const double count = static_cast<double>(n * m);
  double total = 0.0;
  for (std::size_t i = 0; i < n * m; ++i) {
    const double r = static_cast<double>(y.data()[i]) - targets.data()[i];
    total += r * r;
    grad.data()[i] = static_cast<float>(2.0 * r / count);
  }
  const double mse = total / count;
  return {kind == LossKind::RMSLE ? std::sqrt(mse) : mse, std::move(grad)};
}

Matrix prepare_targets(LossKind loss, const Matrix& targets) {
  if (loss != LossKind::RMSLE) return targets;
  Matrix out = targets;
  for (auto& t : out.data()) {
    if (!(t > -1.0f)) throw std::invalid_argument("RMSLE targets must exceed -1");
    t = static_cast<float>(std::log1p(static_cast<double>(t)));
  }
  return out;
}

// --- Network ------------------------------------------------------------------

Network::Network(NetworkSpec spec, std::uint64_t seed, const RuntimeOptions& rt) : spec_(std::move(spec)), rt_(rt) {
  validate(spec_);
  layers_.reserve(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    layers_.emplace_back(spec_.layers[i], init_params(spec_.layers[i], mix_seed(seed, i)), rt_);
  }
}

Network::Network(NetworkSpec spec, std::vector<LayerParams> params, const RuntimeOptions& rt)
    : spec_(std::move(spec)), rt_(rt) {
  validate(spec_);
  if (params.size() != spec_.layers.size()) throw std::invalid_argument("one parameter set per layer required");
  layers_.reserve(spec_.layers.size());
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) layers_.emplace_back(spec_.layers[i], std::move(params[i]), rt_);
}

Matrix Network::forward(const Matrix& x) {
  Matrix h = x;
  for (auto& l : layers_) h = l.forward(h);
  return h;
}

Matrix Network::infer(const Matrix& x) const {
  Matrix h = x;
  for (const auto& l : layers_) h = l.infer(h);
  return h;
}

void Network::backward(const Matrix& dy) {
  Matrix g = dy;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i].backward(g);
}

// --- Adam ---------------------------------------------------------------------

Adam::Adam(const Network& net, AdamParams hp) : hp_(hp) {
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const auto& p = net.layer(i).params();
    m_.emplace_back(p.coeff.size() + p.bias.size(), 0.0);
    v_.emplace_back(p.coeff.size() + p.bias.size(), 0.0);
  }
}

void Adam::step(Network& net) {
  if (net.layer_count() != m_.size()) throw std::invalid_argument("optimizer was built for a different network");
  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(hp_.beta1, t);
  const double c2 = 1.0 - std::pow(hp_.beta2, t);
  auto update = [&](float& param, float grad, double& m, double& v) {
    const double g = grad;
    m = hp_.beta1 * m + (1.0 - hp_.beta1) * g;
    v = hp_.beta2 * v + (1.0 - hp_.beta2) * g * g;
    const double delta = hp_.lr * (m / c1) / (std::sqrt(v / c2) + hp_.eps);
    param = static_cast<float>(static_cast<double>(param) - delta);
  };
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    KanLayer& layer = net.layer(i);
    auto coeff = layer.params().coeff.data();
    const auto cg = layer.coeff_grad().data();
    if (cg.size() != coeff.size()) throw std::logic_error("layer has no gradient for this step");
    auto& bias = layer.params().bias;
    const auto& bg = layer.bias_grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t e = 0; e < coeff.size(); ++e) update(coeff[e], cg[e], m[e], v[e]);
    for (std::size_t e = 0; e < bias.size(); ++e) update(bias[e], bg[e], m[coeff.size() + e], v[coeff.size() + e]);
  }
}

// --- Training -----------------------------------------------------------------

TrainingError::TrainingError(std::size_t epoch, std::size_t batch)
    : std::runtime_error("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch)),
      epoch_(epoch),
      batch_(batch) {}

double evaluate_loss(const Network& net, const Dataset& data) {
  check_targets(net.spec(), data);
  return compute_loss(net.spec().loss, net.infer(data.features), prepare_targets(net.spec().loss, data.targets)).loss;
}

TrainingTrace network_train(Network& net, const Dataset& data, const TrainOptions& opts) {
  check_targets(net.spec(), data);
  if (opts.batch_size == 0) throw std::invalid_argument("batch size must be positive");
  const LossKind loss = net.spec().loss;
  const Matrix targets = prepare_targets(loss, data.targets);
  const std::size_t n = data.size();
  Adam adam(net, opts.adam);

  TrainingTrace trace;
  std::vector<std::size_t> order(n);
  for (std::size_t epoch = 1; epoch <= opts.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(opts.seed, 0x5EED0000 + epoch));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochRecord rec{epoch, 0.0, 0.0, 0.0, 0.0};
    double weighted = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += opts.batch_size) {
      ++batch_no;
      const std::span<const std::size_t> rows(order.data() + start, std::min(opts.batch_size, n - start));
      const Matrix xb = gather_rows(data.features, rows);
      const Matrix tb = gather_rows(targets, rows);

      auto t0 = Clock::now();
      const Matrix y = net.forward(xb);
      LossValue lv = compute_loss(loss, y, tb);
      rec.forward_s += seconds_since(t0);
      if (!std::isfinite(lv.loss)) throw TrainingError(epoch, batch_no);
      // RMSLE batches are averaged as mean squared errors.
      const double batch_mse = loss == LossKind::RMSLE ? lv.loss * lv.loss : lv.loss;
      weighted += batch_mse * static_cast<double>(rows.size());

      t0 = Clock::now();
      net.backward(lv.grad);
      rec.backward_s += seconds_since(t0);

      t0 = Clock::now();
      adam.step(net);
      rec.step_s += seconds_since(t0);
    }
    const double mean = weighted / static_cast<double>(n);
    rec.loss = loss == LossKind::RMSLE ? std::sqrt(mean) : mean;
    trace.epochs.push_back(rec);
  }
  trace.final_loss = evaluate_loss(net, data);
  return trace;
}

TrainingTrace network_train(const NetworkSpec& spec, const Dataset& data, const TrainOptions& opts,
                            const RuntimeOptions& rt) {
  Network net(spec, opts.seed, rt);
  return network_train(net, data, opts);
}

// --- Checkpoints --------------------------------------------------------------

namespace {

constexpr int kManifestVersion = 1;

std::string layer_file(std::size_t i) { return "layer_" + std::to_string(i) + ".pkck"; }

}  // namespace

void save_network(const Network& net, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());

  nlohmann::json manifest;
  manifest["format"] = "polykan-network";
  manifest["version"] = kManifestVersion;
  manifest["loss"] = std::string(to_string(net.spec().loss));
  manifest["lut_size"] = net.runtime().lut_size;
  manifest["layers"] = nlohmann::json::array();
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    const KanLayer& l = net.layer(i);
    const LayerSpec& s = l.spec();
    write_checkpoint(l.params().coeff, dir / layer_file(i));
    manifest["layers"].push_back({
        {"d_in", s.d_in},
        {"d_out", s.d_out},
        {"degree", s.degree},
        {"basis", std::string(to_string(s.kind))},
        {"mode", s.mode.basis_path == BasisPath::LutInterp ? "lut" : "exact"},
        {"tanh_jacobian", s.mode.include_tanh_jacobian},
        {"has_bias", s.has_bias},
        {"bias", l.params().bias},
        {"coefficients", layer_file(i)},
    });
  }
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("cannot write '" + (dir / "manifest.json").string() + "'");
  out << manifest.dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest");
}

Network load_network(const std::filesystem::path& dir, const RuntimeOptions& rt) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot open '" + (dir / "manifest.json").string() + "'");
  nlohmann::json manifest;
  try {
    in >> manifest;
    if (manifest.at("format") != "polykan-network" || manifest.at("version") != kManifestVersion) {
      throw IoError("unsupported manifest format");
    }
    NetworkSpec spec;
    spec.loss = parse_loss_kind(manifest.at("loss").get<std::string>());
    std::vector<LayerParams> params;
    for (const auto& l : manifest.at("layers")) {
      LayerSpec s;
      s.d_in = l.at("d_in").get<std::size_t>();
      s.d_out = l.at("d_out").get<std::size_t>();
      s.degree = l.at("degree").get<int>();
      s.kind = parse_basis_kind(l.at("basis").get<std::string>());
      s.mode.basis_path = l.at("mode") == "lut" ? BasisPath::LutInterp : BasisPath::ExactRecurrence;
      s.mode.include_tanh_jacobian = l.at("tanh_jacobian").get<bool>();
      s.has_bias = l.at("has_bias").get<bool>();
      spec.layers.push_back(s);
      params.push_back({read_checkpoint(dir / l.at("coefficients").get<std::string>()),
                        l.at("bias").get<std::vector<float>>()});
    }
    return Network(std::move(spec), std::move(params), rt);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed manifest: " + std::string(e.what()));
  }
}

}  // namespace polykan
