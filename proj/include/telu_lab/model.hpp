#pragma once
/*
 * Layer-stack models (dense, conv2d, maxpool2, flatten, activation) built on
 * the tape, plus softmax cross-entropy and a whole-model finite-difference
 * gradient check.
 *
 * Weights: dense (out, in), conv (out_ch, in_ch, k, k); biases (out).
 * Initialization is Kaiming-uniform, bound sqrt(6 / fan_in), biases zero.
 */

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "telu_lab/activation.hpp"
#include "telu_lab/autograd.hpp"
#include "telu_lab/errors.hpp"
#include "telu_lab/rng.hpp"
#include "telu_lab/tensor.hpp"

namespace telu_lab {

struct LayerSpec {
  enum class Type { Dense, Conv2d, MaxPool2, Flatten, Activation };

  Type type = Type::Dense;
  std::size_t in = 0, out = 0;               // dense
  std::size_t in_ch = 0, out_ch = 0, k = 0;  // conv2d
  std::optional<ActivationKind> activation;  // unset: the model-wide activation

  static LayerSpec dense(std::size_t in, std::size_t out) {
    LayerSpec l;
    l.in = in;
    l.out = out;
    return l;
  }
  static LayerSpec conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t k) {
    LayerSpec l;
    l.type = Type::Conv2d;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.k = k;
    return l;
  }
  static LayerSpec maxpool2() { return of(Type::MaxPool2); }
  static LayerSpec flatten() { return of(Type::Flatten); }
  static LayerSpec act(std::optional<ActivationKind> kind = std::nullopt) {
    LayerSpec l = of(Type::Activation);
    l.activation = kind;
    return l;
  }

 private:
  static LayerSpec of(Type t) {
    LayerSpec l;
    l.type = t;
    return l;
  }
};

inline const char* to_string(LayerSpec::Type t) {
  switch (t) {
    case LayerSpec::Type::Dense: return "dense";
    case LayerSpec::Type::Conv2d: return "conv2d";
    case LayerSpec::Type::MaxPool2: return "maxpool2";
    case LayerSpec::Type::Flatten: return "flatten";
    case LayerSpec::Type::Activation: return "activation";
  }
  return "?";
}

class Model {
 public:
  // input_shape is per sample, e.g. {32} or {3, 32, 32}. Validates that every
  // layer accepts the previous layer's output and that the last layer yields
  // a vector of class scores.
  Model(Shape input_shape, std::vector<LayerSpec> layers, ActivationKind activation = ActivationKind::telu())
      : input_shape_(std::move(input_shape)), layers_(std::move(layers)), activation_(activation) {
    Shape cur = input_shape_;
    if (cur.empty() || numel(cur) == 0) throw ConfigError("model input shape must be non-empty");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const LayerSpec& l = layers_[i];
      const std::string where = "model.layers[" + std::to_string(i) + "] (" + to_string(l.type) + ")";
      switch (l.type) {
        case LayerSpec::Type::Dense:
          if (l.in == 0 || l.out == 0) throw ConfigError(where + ": in/out must be positive");
          if (cur.size() != 1 || cur[0] != l.in) {
            throw ConfigError(where + ": expects input (" + std::to_string(l.in) + "), got " + shape_str(cur));
          }
          param_slots_.push_back(std::make_pair(params_.size(), params_.size() + 1));
          params_.emplace_back(Shape{l.out, l.in});
          params_.emplace_back(Shape{l.out});
          cur = {l.out};
          break;
        case LayerSpec::Type::Conv2d:
          if (l.in_ch == 0 || l.out_ch == 0 || l.k == 0) throw ConfigError(where + ": in_ch/out_ch/k must be positive");
          if (cur.size() != 3 || cur[0] != l.in_ch || cur[1] < l.k || cur[2] < l.k) {
            throw ConfigError(where + ": expects (" + std::to_string(l.in_ch) + ", h>=k, w>=k), got " + shape_str(cur));
          }
          param_slots_.push_back(std::make_pair(params_.size(), params_.size() + 1));
          params_.emplace_back(Shape{l.out_ch, l.in_ch, l.k, l.k});
          params_.emplace_back(Shape{l.out_ch});
          cur = {l.out_ch, cur[1] - l.k + 1, cur[2] - l.k + 1};
          break;
        case LayerSpec::Type::MaxPool2:
          if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) throw ConfigError(where + ": expects (c, h>=2, w>=2), got " + shape_str(cur));
          param_slots_.push_back(std::nullopt);
          cur = {cur[0], cur[1] / 2, cur[2] / 2};
          break;
        case LayerSpec::Type::Flatten:
          param_slots_.push_back(std::nullopt);
          cur = {numel(cur)};
          break;
        case LayerSpec::Type::Activation:
          param_slots_.push_back(std::nullopt);
          break;
      }
    }
    if (cur.size() != 1) throw ConfigError("model output must be a vector of class scores, got " + shape_str(cur));
    output_shape_ = cur;
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return output_shape_; }
  std::size_t num_classes() const { return output_shape_[0]; }
  const std::vector<LayerSpec>& layers() const { return layers_; }
  const ActivationKind& activation() const { return activation_; }
  void set_activation(const ActivationKind& kind) { activation_ = kind; }

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.size();
    return n;
  }

  // Kaiming-uniform weights, zero biases. Parameter tensor i draws from
  // stream i + 1 of the seed.
  void init(std::uint64_t seed) {
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      if (!param_slots_[li]) continue;
      const LayerSpec& l = layers_[li];
      const auto [wi, bi] = *param_slots_[li];
      const double fan_in = l.type == LayerSpec::Type::Dense ? static_cast<double>(l.in)
                                                            : static_cast<double>(l.in_ch * l.k * l.k);
      const double bound = std::sqrt(6.0 / fan_in);
      CounterRng rng(seed, wi + 1);
      for (double& w : params_[wi].vec()) w = rng.uniform(-bound, bound);
      params_[bi].fill(0.0);
    }
  }

  // Builds the graph for `batch` (shape (n, input_shape...)) on `tape`;
  // returns the id of the logits.
  VarId build(Tape& tape, const Tensor& batch) const {
    if (batch.rank() != input_shape_.size() + 1 ||
        !std::equal(input_shape_.begin(), input_shape_.end(), batch.shape().begin() + 1)) {
      throw ConfigError("batch shape " + shape_str(batch.shape()) + " does not match model input (n, " +
                        shape_str(input_shape_).substr(1));
    }
    const std::size_t n = batch.dim(0);
    VarId cur = tape.input(batch);
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const LayerSpec& l = layers_[li];
      switch (l.type) {
        case LayerSpec::Type::Dense: {
          const auto [wi, bi] = *param_slots_[li];
          cur = tape.add_bias(tape.matmul_t(cur, tape.parameter(params_[wi], wi)), tape.parameter(params_[bi], bi));
          break;
        }
        case LayerSpec::Type::Conv2d: {
          const auto [wi, bi] = *param_slots_[li];
          cur = tape.add_bias(tape.conv2d(cur, tape.parameter(params_[wi], wi)), tape.parameter(params_[bi], bi));
          break;
        }
        case LayerSpec::Type::MaxPool2: cur = tape.maxpool2(cur); break;
        case LayerSpec::Type::Flatten: cur = tape.reshape(cur, {n, tape.value(cur).size() / n}); break;
        case LayerSpec::Type::Activation: cur = tape.activate(cur, l.activation.value_or(activation_)); break;
      }
    }
    return cur;
  }

 private:
  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  ActivationKind activation_;
  std::vector<Tensor> params_;
  std::vector<std::optional<std::pair<std::size_t, std::size_t>>> param_slots_;  // (weight, bias) per layer
  Shape output_shape_;
};

// Result of a forward pass. When recorded, backward() may be called once.
struct ForwardPass {
  Tensor logits;
  std::optional<Tape> tape;
  VarId output = 0;

  std::vector<Tensor> backward(const Tensor& loss_grad) {
    if (!tape) throw UsageError("forward pass was not recorded");
    return tape->backward(output, loss_grad);
  }
};

// check_finite off lets an already-diverged model be scored instead of
// raising DivergenceError.
inline ForwardPass forward(const Model& model, const Tensor& batch, bool record, bool check_finite = true) {
  Tape tape(model.params().size());
  tape.set_recording(record);
  tape.set_check_finite(check_finite);
  const VarId out = model.build(tape, batch);
  ForwardPass fp{tape.value(out), std::nullopt, out};
  if (record) fp.tape = std::move(tape);
  return fp;
}

inline std::vector<Tensor> backward(ForwardPass& pass, const Tensor& loss_grad) { return pass.backward(loss_grad); }

struct LossAndGrad {
  double loss = 0.0;
  Tensor grad;
};

// Mean over the batch of -log softmax(logits)[label]; gradient
// (softmax - onehot) / n. Rows are shifted by their max before exponentiating.
inline LossAndGrad softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) throw ConfigError("softmax_cross_entropy: logits must be (n, classes)");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ConfigError("softmax_cross_entropy: label count does not match batch");
  LossAndGrad out{0.0, Tensor(logits.shape())};
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw FormatError("label " + std::to_string(y) + " out of range [0, " + std::to_string(c) + ")");
    }
    const double* row = &logits.data()[i * c];
    const double m = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(row[j] - m);
    const double log_z = m + std::log(z);
    out.loss += log_z - row[y];
    for (std::size_t j = 0; j < c; ++j) {
      const double p = std::exp(row[j] - log_z);
      out.grad[i * c + j] = (p - (static_cast<std::size_t>(y) == j ? 1.0 : 0.0)) / static_cast<double>(n);
    }
  }
  out.loss /= static_cast<double>(n);
  return out;
}

inline std::vector<double> softmax_row(std::span<const double> row) {
  const double m = *std::max_element(row.begin(), row.end());
  std::vector<double> p(row.size());
  double z = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) z += (p[j] = std::exp(row[j] - m));
  for (double& v : p) v /= z;
  return p;
}

// Loss and per-parameter gradients for one batch.
inline std::pair<double, std::vector<Tensor>> loss_and_gradients(const Model& model, const Tensor& batch,
                                                                 std::span<const int> labels) {
  ForwardPass pass = forward(model, batch, true);
  const auto lg = softmax_cross_entropy(pass.logits, labels);
  if (!std::isfinite(lg.loss)) throw DivergenceError("non-finite loss");
  return {lg.loss, pass.backward(lg.grad)};
}

inline double loss_only(const Model& model, const Tensor& batch, std::span<const int> labels) {
  return softmax_cross_entropy(forward(model, batch, false).logits, labels).loss;
}

// Perturbs every parameter entry by +-h and compares the central difference
// of the loss with backward(). Relative error per entry is
// |fd - bp| / max(|fd|, |bp|, 1e-4); returns the worst, or 0 for a model
// without parameters.
inline double finite_difference_check(const Model& model, const Tensor& batch, std::span<const int> labels,
                                      double h = 1e-6) {
  const auto [loss, grads] = loss_and_gradients(model, batch, labels);
  (void)loss;
  Model probe = model;
  double worst = 0.0;
  for (std::size_t p = 0; p < probe.params().size(); ++p) {
    for (std::size_t i = 0; i < probe.params()[p].size(); ++i) {
      double& w = probe.params()[p][i];
      const double saved = w;
      w = saved + h;
      const double up = loss_only(probe, batch, labels);
      w = saved - h;
      const double down = loss_only(probe, batch, labels);
      w = saved;
      const double fd = (up - down) / (2.0 * h);
      const double bp = grads[p][i];
      const double err = std::abs(fd - bp) / std::max({std::abs(fd), std::abs(bp), 1e-4});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Checkpoints: raw little-endian float64 blob of all parameters in order,
// plus a JSON manifest {"format", "dtype", "params": [{"shape", "offset"}]}.

inline void save_checkpoint(const Model& model, const std::string& blob_path, const std::string& manifest_path) {
  std::ofstream blob(blob_path, std::ios::binary);
  if (!blob) throw ConfigError("cannot write " + blob_path);
  nlohmann::json manifest{{"format", "telu_lab.checkpoint/v1"}, {"dtype", "float64-le"}, {"params", nlohmann::json::array()}};
  std::size_t offset = 0;
  for (const auto& p : model.params()) {
    blob.write(reinterpret_cast<const char*>(p.data().data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    manifest["params"].push_back({{"shape", p.shape()}, {"offset", offset}});
    offset += p.size();
  }
  std::ofstream(manifest_path) << manifest.dump(2) << "\n";
}

inline void load_checkpoint(Model& model, const std::string& blob_path, const std::string& manifest_path) {
  std::ifstream mf(manifest_path);
  if (!mf) throw ConfigError("cannot read " + manifest_path);
  const auto manifest = nlohmann::json::parse(mf);
  const auto& entries = manifest.at("params");
  if (entries.size() != model.params().size()) throw ConfigError("checkpoint parameter count does not match model");
  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw ConfigError("cannot read " + blob_path);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    Tensor& p = model.params()[i];
    if (entries[i].at("shape").get<Shape>() != p.shape()) throw ConfigError("checkpoint shape mismatch at param " + std::to_string(i));
    blob.read(reinterpret_cast<char*>(p.data().data()), static_cast<std::streamsize>(p.size() * sizeof(double)));
    if (!blob) throw FormatError("checkpoint blob truncated");
  }
}

}  // namespace telu_lab
