#pragma once
/*
 * SGD, SGD with momentum, AdamW and RMSprop, plus the step-decay schedule.
 *
 * Update rules (g = gradient, p = parameter, wd = weight decay):
 *   SGD       p <- p - lr (g + wd p)
 *   Momentum  buf <- m buf + g + wd p;  p <- p - lr buf
 *   AdamW     m <- b1 m + (1 - b1) g;  v <- b2 v + (1 - b2) g^2
 *             p <- p - lr (mhat / (sqrt(vhat) + eps) + wd p)   (bias-corrected, decoupled decay)
 *   RMSprop   s <- a s + (1 - a) g^2;  p <- p - lr (g / (sqrt(s) + eps) + wd p)
 *
 * SGD/Momentum/RMSprop couple the decay into the gradient the way the common
 * framework defaults do. Momentum and RMSprop follow the PyTorch conventions
 * (no dampening, no Nesterov, no centered variance).
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "telu_lab/errors.hpp"
#include "telu_lab/tensor.hpp"

namespace telu_lab {

enum class OptimizerKind { SGD, Momentum, AdamW, RMSprop };

inline const char* to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::Momentum: return "momentum";
    case OptimizerKind::AdamW: return "adamw";
    case OptimizerKind::RMSprop: return "rmsprop";
  }
  return "?";
}

inline std::optional<OptimizerKind> parse_optimizer(std::string_view s) {
  for (auto k : {OptimizerKind::SGD, OptimizerKind::Momentum, OptimizerKind::AdamW, OptimizerKind::RMSprop})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::SGD;
  double lr = 0.1;
  double weight_decay = 0.0;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rms_alpha = 0.99;

  void validate() const {
    auto unit = [](double v) { return v >= 0.0 && v < 1.0; };
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("optimizer.lr must be > 0");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) throw ConfigError("optimizer.weight_decay must be >= 0");
    if (!unit(momentum)) throw ConfigError("optimizer.momentum must be in [0, 1)");
    if (!unit(beta1) || !unit(beta2)) throw ConfigError("optimizer.betas must be in [0, 1)");
    if (!(eps > 0.0)) throw ConfigError("optimizer.eps must be > 0");
    if (!unit(rms_alpha)) throw ConfigError("optimizer.rms_alpha must be in [0, 1)");
  }
};

struct LrSchedule {
  double initial_lr = 0.1;
  double gamma = 1.0;
  std::vector<std::size_t> milestones;

  void validate() const {
    if (!(initial_lr > 0.0)) throw ConfigError("schedule: initial lr must be > 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("schedule.gamma must be in (0, 1]");
    for (std::size_t i = 1; i < milestones.size(); ++i)
      if (milestones[i] <= milestones[i - 1]) throw ConfigError("schedule.milestones must be strictly increasing");
  }
};

// initial_lr * gamma^k, k = number of milestones <= epoch.
inline double lr_at_epoch(const LrSchedule& s, std::size_t epoch) {
  double lr = s.initial_lr;
  for (std::size_t m : s.milestones)
    if (m <= epoch) lr *= s.gamma;
  return lr;
}

// Milestones rescaled from a reference run length, e.g. {60, 120, 160} over
// 200 epochs -> {6, 12, 16} over 20. Collisions are dropped.
inline std::vector<std::size_t> scale_milestones(const std::vector<std::size_t>& ms, std::size_t from_epochs,
                                                 std::size_t to_epochs) {
  std::vector<std::size_t> out;
  for (std::size_t m : ms) {
    const auto s = static_cast<std::size_t>(std::llround(static_cast<double>(m) * to_epochs / from_epochs));
    if (s >= 1 && (out.empty() || s > out.back())) out.push_back(s);
  }
  return out;
}

struct OptimizerState {
  std::vector<Tensor> buf1;  // momentum buffer / first moment / squared average
  std::vector<Tensor> buf2;  // second moment (AdamW)
  std::uint64_t t = 0;
};

// One update of every parameter. Gradients are checked before anything is
// touched: a non-finite entry raises DivergenceError and leaves params and
// state unchanged.
inline void step(OptimizerState& state, std::vector<Tensor>& params, const std::vector<Tensor>& grads,
                 const OptimizerConfig& cfg, double lr) {
  if (params.size() != grads.size()) throw ConfigError("optimizer step: parameter/gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape()) throw ConfigError("optimizer step: gradient shape mismatch");
    if (!grads[i].all_finite()) throw DivergenceError("non-finite gradient reached the optimizer");
  }
  if (state.buf1.empty()) {
    for (const auto& p : params) state.buf1.emplace_back(p.shape());
    if (cfg.kind == OptimizerKind::AdamW)
      for (const auto& p : params) state.buf2.emplace_back(p.shape());
  }
  state.t += 1;
  const double wd = cfg.weight_decay;

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].data();
    auto g = grads[i].data();
    auto b1 = state.buf1[i].data();
    switch (cfg.kind) {
      case OptimizerKind::SGD:
        for (std::size_t j = 0; j < p.size(); ++j) p[j] -= lr * (g[j] + wd * p[j]);
        break;
      case OptimizerKind::Momentum:
        for (std::size_t j = 0; j < p.size(); ++j) {
          b1[j] = cfg.momentum * b1[j] + g[j] + wd * p[j];
          p[j] -= lr * b1[j];
        }
        break;
      case OptimizerKind::AdamW: {
        auto b2 = state.buf2[i].data();
        const double t = static_cast<double>(state.t);
        const double c1 = 1.0 - std::pow(cfg.beta1, t);
        const double c2 = 1.0 - std::pow(cfg.beta2, t);
        for (std::size_t j = 0; j < p.size(); ++j) {
          b1[j] = cfg.beta1 * b1[j] + (1.0 - cfg.beta1) * g[j];
          b2[j] = cfg.beta2 * b2[j] + (1.0 - cfg.beta2) * g[j] * g[j];
          const double mhat = b1[j] / c1;
          const double vhat = b2[j] / c2;
          p[j] -= lr * (mhat / (std::sqrt(vhat) + cfg.eps) + wd * p[j]);
        }
        break;
      }
      case OptimizerKind::RMSprop:
        for (std::size_t j = 0; j < p.size(); ++j) {
          b1[j] = cfg.rms_alpha * b1[j] + (1.0 - cfg.rms_alpha) * g[j] * g[j];
          p[j] -= lr * (g[j] / (std::sqrt(b1[j]) + cfg.eps) + wd * p[j]);
        }
        break;
    }
  }
}

}  // namespace telu_lab
