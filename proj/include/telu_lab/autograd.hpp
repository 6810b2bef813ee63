#pragma once
/*
 * Reverse-mode automatic differentiation over a recorded tape.
 *
 * Each primitive appends a node holding its operand ids, its output id and
 * whatever the vector-Jacobian product needs (activation kind, max-pool
 * argmax). Nodes are appended in evaluation order, so replaying them
 * backwards visits every consumer before its operands.
 *
 * Forward values are checked as they are produced: the first NaN/Inf raises
 * DivergenceError.
 */

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "telu_lab/activation.hpp"
#include "telu_lab/errors.hpp"
#include "telu_lab/tensor.hpp"

namespace telu_lab {

using VarId = std::size_t;

class Tape {
 public:
  enum class Op { MatMulT, AddBias, Conv2d, MaxPool2, Reshape, Activation };

  struct Node {
    Op op;
    VarId lhs = 0;
    VarId rhs = 0;  // unused by unary ops
    VarId out = 0;
    ActivationKind activation{};
    std::vector<std::size_t> argmax;  // MaxPool2: flat input index per output
  };

  explicit Tape(std::size_t num_params = 0) : param_grads_slots_(num_params) {}

  VarId input(Tensor value) { return push_value(std::move(value), std::nullopt); }

  VarId parameter(const Tensor& value, std::size_t index) {
    if (index >= param_grads_slots_) param_grads_slots_ = index + 1;
    return push_value(value, index);
  }

  const Tensor& value(VarId id) const { return values_.at(id); }
  const std::vector<Node>& nodes() const { return nodes_; }
  bool consumed() const { return consumed_; }

  // x (n, in) times w^T where w is (out, in).
  VarId matmul_t(VarId x, VarId w) {
    const Tensor& X = values_[x];
    const Tensor& W = values_[w];
    if (X.rank() != 2 || W.rank() != 2 || X.dim(1) != W.dim(1)) {
      throw ConfigError("matmul_t: incompatible shapes " + shape_str(X.shape()) + " and " + shape_str(W.shape()));
    }
    const std::size_t n = X.dim(0), in = X.dim(1), out = W.dim(0);
    Tensor Y({n, out});
    for (std::size_t i = 0; i < n; ++i) {
      const double* xr = &X.data()[i * in];
      for (std::size_t o = 0; o < out; ++o) {
        const double* wr = &W.data()[o * in];
        double acc = 0.0;
        for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
        Y[i * out + o] = acc;
      }
    }
    return push_node(Op::MatMulT, x, w, std::move(Y));
  }

  // Adds b (shape (c)) along axis 1 of x (shape (n, c, ...)).
  VarId add_bias(VarId x, VarId b) {
    const Tensor& X = values_[x];
    const Tensor& B = values_[b];
    if (X.rank() < 2 || B.rank() != 1 || B.dim(0) != X.dim(1)) {
      throw ConfigError("add_bias: incompatible shapes " + shape_str(X.shape()) + " and " + shape_str(B.shape()));
    }
    Tensor Y = X;
    const std::size_t c = X.dim(1), inner = X.size() / (X.dim(0) * c);
    for (std::size_t i = 0; i < X.dim(0); ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t s = 0; s < inner; ++s) Y[(i * c + ch) * inner + s] += B[ch];
    return push_node(Op::AddBias, x, b, std::move(Y));
  }

  // Valid, stride-1 cross-correlation: x (n, c, h, w), w (o, c, k, k).
  VarId conv2d(VarId x, VarId w) {
    const Tensor& X = values_[x];
    const Tensor& W = values_[w];
    if (X.rank() != 4 || W.rank() != 4 || X.dim(1) != W.dim(1) || W.dim(2) != W.dim(3) || W.dim(2) > X.dim(2) ||
        W.dim(3) > X.dim(3)) {
      throw ConfigError("conv2d: incompatible shapes " + shape_str(X.shape()) + " and " + shape_str(W.shape()));
    }
    const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
    const std::size_t o = W.dim(0), k = W.dim(2);
    const std::size_t oh = h - k + 1, ow = wd - k + 1;
    Tensor Y({n, o, oh, ow});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t oc = 0; oc < o; ++oc)
        for (std::size_t y = 0; y < oh; ++y)
          for (std::size_t xx = 0; xx < ow; ++xx) {
            double acc = 0.0;
            for (std::size_t ic = 0; ic < c; ++ic)
              for (std::size_t ky = 0; ky < k; ++ky) {
                const double* xrow = &X.data()[((i * c + ic) * h + y + ky) * wd + xx];
                const double* wrow = &W.data()[((oc * c + ic) * k + ky) * k];
                for (std::size_t kx = 0; kx < k; ++kx) acc += xrow[kx] * wrow[kx];
              }
            Y[((i * o + oc) * oh + y) * ow + xx] = acc;
          }
    return push_node(Op::Conv2d, x, w, std::move(Y));
  }

  // 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
  VarId maxpool2(VarId x) {
    const Tensor& X = values_[x];
    if (X.rank() != 4 || X.dim(2) < 2 || X.dim(3) < 2) {
      throw ConfigError("maxpool2: need (n, c, h, w) with h, w >= 2, got " + shape_str(X.shape()));
    }
    const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2), w = X.dim(3);
    const std::size_t oh = h / 2, ow = w / 2;
    Tensor Y({n, c, oh, ow});
    std::vector<std::size_t> arg(Y.size());
    for (std::size_t plane = 0; plane < n * c; ++plane)
      for (std::size_t y = 0; y < oh; ++y)
        for (std::size_t xx = 0; xx < ow; ++xx) {
          std::size_t best = (plane * h + 2 * y) * w + 2 * xx;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t idx = (plane * h + 2 * y + dy) * w + 2 * xx + dx;
              if (X[idx] > X[best]) best = idx;
            }
          const std::size_t o = (plane * oh + y) * ow + xx;
          Y[o] = X[best];
          arg[o] = best;
        }
    const VarId id = push_node(Op::MaxPool2, x, 0, std::move(Y));
    if (recording_) nodes_.back().argmax = std::move(arg);
    return id;
  }

  VarId reshape(VarId x, Shape shape) { return push_node(Op::Reshape, x, 0, values_[x].reshaped(std::move(shape))); }

  VarId activate(VarId x, const ActivationKind& kind) {
    const Tensor& X = values_[x];
    if (!X.all_finite()) throw DivergenceError("non-finite activation input");
    Tensor Y(X.shape());
    for (std::size_t i = 0; i < X.size(); ++i) Y[i] = eval(kind, X[i]);
    const VarId id = push_node(Op::Activation, x, 0, std::move(Y));
    if (recording_) nodes_.back().activation = kind;
    return id;
  }

  // When off, no nodes are stored and backward is unavailable.
  void set_recording(bool on) { recording_ = on; }
  bool recording() const { return recording_; }

  // When off, non-finite forward values are passed through instead of
  // raising (used to score an already-diverged model).
  void set_check_finite(bool on) { check_finite_ = on; }

  // Vector-Jacobian products from `output` seeded with `seed`; returns one
  // gradient per parameter index. A tape can be replayed only once.
  std::vector<Tensor> backward(VarId output, const Tensor& seed) {
    if (consumed_) throw UsageError("tape already consumed by a previous backward pass");
    if (!recording_) throw UsageError("backward on a tape recorded with recording off");
    if (seed.shape() != values_.at(output).shape()) {
      throw ConfigError("backward: seed shape " + shape_str(seed.shape()) + " does not match output " +
                        shape_str(values_[output].shape()));
    }
    consumed_ = true;
    std::vector<std::optional<Tensor>> grads(values_.size());
    grads[output] = seed;
    auto acc = [&](VarId id) -> Tensor& {
      if (!grads[id]) grads[id] = Tensor(values_[id].shape());
      return *grads[id];
    };

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      const Node& node = *it;
      if (!grads[node.out]) continue;
      const Tensor& G = *grads[node.out];
      switch (node.op) {
        case Op::MatMulT: {
          const Tensor& X = values_[node.lhs];
          const Tensor& W = values_[node.rhs];
          const std::size_t n = X.dim(0), in = X.dim(1), out = W.dim(0);
          Tensor& gx = acc(node.lhs);
          Tensor& gw = acc(node.rhs);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t o = 0; o < out; ++o) {
              const double g = G[i * out + o];
              if (g == 0.0) continue;
              for (std::size_t k = 0; k < in; ++k) {
                gx[i * in + k] += g * W[o * in + k];
                gw[o * in + k] += g * X[i * in + k];
              }
            }
          break;
        }
        case Op::AddBias: {
          const Tensor& X = values_[node.lhs];
          Tensor& gx = acc(node.lhs);
          Tensor& gb = acc(node.rhs);
          const std::size_t c = X.dim(1), inner = X.size() / (X.dim(0) * c);
          for (std::size_t i = 0; i < X.dim(0); ++i)
            for (std::size_t ch = 0; ch < c; ++ch)
              for (std::size_t s = 0; s < inner; ++s) {
                const std::size_t idx = (i * c + ch) * inner + s;
                gx[idx] += G[idx];
                gb[ch] += G[idx];
              }
          break;
        }
        case Op::Conv2d: {
          const Tensor& X = values_[node.lhs];
          const Tensor& W = values_[node.rhs];
          const std::size_t n = X.dim(0), c = X.dim(1), h = X.dim(2), wd = X.dim(3);
          const std::size_t o = W.dim(0), k = W.dim(2), oh = h - k + 1, ow = wd - k + 1;
          Tensor& gx = acc(node.lhs);
          Tensor& gw = acc(node.rhs);
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t oc = 0; oc < o; ++oc)
              for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx) {
                  const double g = G[((i * o + oc) * oh + y) * ow + xx];
                  if (g == 0.0) continue;
                  for (std::size_t ic = 0; ic < c; ++ic)
                    for (std::size_t ky = 0; ky < k; ++ky)
                      for (std::size_t kx = 0; kx < k; ++kx) {
                        const std::size_t xi = ((i * c + ic) * h + y + ky) * wd + xx + kx;
                        const std::size_t wi = ((oc * c + ic) * k + ky) * k + kx;
                        gx[xi] += g * W[wi];
                        gw[wi] += g * X[xi];
                      }
                }
          break;
        }
        case Op::MaxPool2: {
          Tensor& gx = acc(node.lhs);
          for (std::size_t o = 0; o < G.size(); ++o) gx[node.argmax[o]] += G[o];
          break;
        }
        case Op::Reshape: {
          Tensor& gx = acc(node.lhs);
          for (std::size_t i = 0; i < G.size(); ++i) gx[i] += G[i];
          break;
        }
        case Op::Activation: {
          const Tensor& X = values_[node.lhs];
          Tensor& gx = acc(node.lhs);
          for (std::size_t i = 0; i < G.size(); ++i) gx[i] += G[i] * derivative(node.activation, X[i]);
          break;
        }
      }
    }

    std::vector<Tensor> out(param_grads_slots_);
    for (VarId id = 0; id < values_.size(); ++id) {
      if (!param_index_[id]) continue;
      Tensor g = grads[id] ? std::move(*grads[id]) : Tensor(values_[id].shape());
      if (check_finite_ && !g.all_finite()) throw DivergenceError("non-finite gradient");
      out[*param_index_[id]] = std::move(g);
    }
    return out;
  }

 private:
  VarId push_value(Tensor value, std::optional<std::size_t> param) {
    values_.push_back(std::move(value));
    param_index_.push_back(param);
    return values_.size() - 1;
  }

  VarId push_node(Op op, VarId lhs, VarId rhs, Tensor out) {
    if (check_finite_ && !out.all_finite()) throw DivergenceError("non-finite value in forward pass");
    const VarId id = push_value(std::move(out), std::nullopt);
    if (recording_) nodes_.push_back(Node{op, lhs, rhs, id, {}, {}});
    return id;
  }

  std::vector<Tensor> values_;
  std::vector<std::optional<std::size_t>> param_index_;
  std::vector<Node> nodes_;
  std::size_t param_grads_slots_ = 0;
  bool recording_ = true;
  bool check_finite_ = true;
  bool consumed_ = false;
};

}  // namespace telu_lab
