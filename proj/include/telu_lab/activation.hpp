#pragma once
/*
 * Scalar activation kernels with closed-form first and second derivatives.
 *
 * Every other part of the lab (property scans, autograd, kernel tables) goes
 * through eval / derivative / second_derivative here, so there is exactly one
 * definition of f, f' and f'' per activation.
 *
 * Formulas:
 *   TeLU    x * tanh(e^x)
 *   ReLU    max(0, x)
 *   GELU    0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))   (tanh form, not erf)
 *   SiLU    x * sigmoid(x)
 *   Mish    x * tanh(softplus(x))
 *   Logish  x * ln(1 + sigmoid(x))
 *   Smish   x * tanh(ln(1 + sigmoid(x)))
 *   ELU     x for x > 0, alpha (e^x - 1) otherwise
 *
 * Logish and Smish follow the definitions of their original publications
 * (Zhu et al., 2021 and Wang et al., 2022).
 */

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "telu_lab/errors.hpp"

namespace telu_lab {

enum class ActivationTag { TeLU, ReLU, GELU, SiLU, Mish, Logish, Smish, ELU };

inline constexpr std::array<ActivationTag, 8> kAllActivationTags = {
    ActivationTag::TeLU, ActivationTag::ReLU,   ActivationTag::GELU,  ActivationTag::SiLU,
    ActivationTag::Mish, ActivationTag::Logish, ActivationTag::Smish, ActivationTag::ELU};

struct ActivationKind {
  ActivationTag tag = ActivationTag::TeLU;
  double alpha = 1.0;  // ELU only

  ActivationKind() = default;
  explicit ActivationKind(ActivationTag t, double a = 1.0) : tag(t), alpha(a) {
    if (tag == ActivationTag::ELU && !(alpha > 0.0 && std::isfinite(alpha))) {
      throw std::invalid_argument("ELU alpha must be a positive finite number");
    }
  }

  static ActivationKind telu() { return ActivationKind(ActivationTag::TeLU); }
  static ActivationKind relu() { return ActivationKind(ActivationTag::ReLU); }
  static ActivationKind gelu() { return ActivationKind(ActivationTag::GELU); }
  static ActivationKind silu() { return ActivationKind(ActivationTag::SiLU); }
  static ActivationKind mish() { return ActivationKind(ActivationTag::Mish); }
  static ActivationKind logish() { return ActivationKind(ActivationTag::Logish); }
  static ActivationKind smish() { return ActivationKind(ActivationTag::Smish); }
  static ActivationKind elu(double a = 1.0) { return ActivationKind(ActivationTag::ELU, a); }

  // Kinds whose first derivative jumps somewhere (at x = 0).
  bool has_kink() const {
    return tag == ActivationTag::ReLU || (tag == ActivationTag::ELU && alpha != 1.0);
  }

  friend bool operator==(const ActivationKind& a, const ActivationKind& b) {
    if (a.tag != b.tag) return false;
    return a.tag != ActivationTag::ELU || a.alpha == b.alpha;
  }
};

inline std::string_view tag_name(ActivationTag tag) {
  switch (tag) {
    case ActivationTag::TeLU: return "telu";
    case ActivationTag::ReLU: return "relu";
    case ActivationTag::GELU: return "gelu";
    case ActivationTag::SiLU: return "silu";
    case ActivationTag::Mish: return "mish";
    case ActivationTag::Logish: return "logish";
    case ActivationTag::Smish: return "smish";
    case ActivationTag::ELU: return "elu";
  }
  return "?";
}

// "elu" at the default alpha, "elu:2" otherwise.
inline std::string to_string(const ActivationKind& kind) {
  std::string name(tag_name(kind.tag));
  if (kind.tag == ActivationTag::ELU && kind.alpha != 1.0) {
    char buf[32];
    std::snprintf(buf, sizeof buf, ":%g", kind.alpha);
    name += buf;
  }
  return name;
}

// Accepts the names produced by to_string, case-insensitively.
inline std::optional<ActivationKind> parse_activation(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::string head = s;
  std::optional<double> alpha;
  if (auto colon = s.find(':'); colon != std::string::npos) {
    head = s.substr(0, colon);
    try {
      std::size_t used = 0;
      alpha = std::stod(s.substr(colon + 1), &used);
      if (used != s.size() - colon - 1) return std::nullopt;
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  for (ActivationTag tag : kAllActivationTags) {
    if (head != tag_name(tag)) continue;
    if (alpha && tag != ActivationTag::ELU) return std::nullopt;
    if (tag == ActivationTag::ELU && alpha && !(*alpha > 0.0 && std::isfinite(*alpha))) return std::nullopt;
    return ActivationKind(tag, alpha.value_or(1.0));
  }
  return std::nullopt;
}

struct ScalarEval {
  double x = 0.0;
  double value = 0.0;
  double first = 0.0;
  double second = 0.0;
  bool nonsmooth = false;  // x sits on a point where f' is undefined (ReLU at 0)
};

namespace detail {

// Beyond |x| = 20 TeLU is evaluated through its asymptotic forms; tanh(e^20)
// equals 1 far past double precision and x e^x needs no tanh there.
inline constexpr double kTeluAsymptote = 20.0;
inline constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
inline constexpr double kGeluK = 0.044715;

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// 1 - tanh(u)^2 without cancellation for large u.
inline double sech2(double u) {
  const double c = std::cosh(u);
  return 1.0 / (c * c);
}

inline ScalarEval telu(double x) {
  ScalarEval r{x};
  if (x >= kTeluAsymptote) {
    r.value = x;
    r.first = 1.0;
    r.second = 0.0;
  } else if (x <= -kTeluAsymptote) {
    const double u = std::exp(x);
    r.value = x * u;
    r.first = u * (1.0 + x);
    r.second = u * (2.0 + x);
  } else {
    const double u = std::exp(x);
    const double t = std::tanh(u);
    const double s2 = sech2(u);
    r.value = x * t;
    r.first = t + x * u * s2;
    r.second = u * s2 * (2.0 + x - 2.0 * x * u * t);
  }
  return r;
}

inline ScalarEval relu(double x) {
  ScalarEval r{x};
  r.value = x > 0.0 ? x : 0.0;
  r.first = x > 0.0 ? 1.0 : 0.0;
  r.second = 0.0;
  r.nonsmooth = (x == 0.0);
  return r;
}

inline ScalarEval gelu(double x) {
  ScalarEval r{x};
  const double z = kGeluC * (x + kGeluK * x * x * x);
  const double dz = kGeluC * (1.0 + 3.0 * kGeluK * x * x);
  const double d2z = kGeluC * 6.0 * kGeluK * x;
  const double t = std::tanh(z);
  const double s2 = sech2(z);
  r.value = 0.5 * x * (1.0 + t);
  r.first = 0.5 * (1.0 + t) + 0.5 * x * s2 * dz;
  r.second = s2 * dz - x * t * s2 * dz * dz + 0.5 * x * s2 * d2z;
  return r;
}

inline ScalarEval silu(double x) {
  ScalarEval r{x};
  const double s = sigmoid(x);
  const double ds = s * (1.0 - s);
  r.value = x * s;
  r.first = s + x * ds;
  r.second = ds * (2.0 + x * (1.0 - 2.0 * s));
  return r;
}

inline ScalarEval mish(double x) {
  ScalarEval r{x};
  const double sp = softplus(x);
  const double t = std::tanh(sp);
  const double s2 = sech2(sp);
  const double s = sigmoid(x);
  r.value = x * t;
  r.first = t + x * s2 * s;
  r.second = s2 * s * (2.0 + x * (1.0 - s - 2.0 * t * s));
  return r;
}

// g = ln(1 + sigmoid(x)) and its first two derivatives.
struct LogSig {
  double g, dg, d2g;
};

inline LogSig log_one_plus_sigmoid(double x) {
  const double s = sigmoid(x);
  const double q = s * (1.0 - s);
  const double den = 1.0 + s;
  return {std::log1p(s), q / den, (q * (1.0 - 2.0 * s) * den - q * q) / (den * den)};
}

inline ScalarEval logish(double x) {
  ScalarEval r{x};
  const LogSig l = log_one_plus_sigmoid(x);
  r.value = x * l.g;
  r.first = l.g + x * l.dg;
  r.second = 2.0 * l.dg + x * l.d2g;
  return r;
}

inline ScalarEval smish(double x) {
  ScalarEval r{x};
  const LogSig l = log_one_plus_sigmoid(x);
  const double t = std::tanh(l.g);
  const double s2 = sech2(l.g);
  r.value = x * t;
  r.first = t + x * s2 * l.dg;
  r.second = 2.0 * s2 * l.dg + x * s2 * (l.d2g - 2.0 * t * l.dg * l.dg);
  return r;
}

inline ScalarEval elu(double x, double alpha) {
  ScalarEval r{x};
  if (x > 0.0) {
    r.value = x;
    r.first = 1.0;
    r.second = 0.0;
  } else {
    const double e = std::exp(x);
    r.value = alpha * (e - 1.0);
    r.first = alpha * e;
    r.second = alpha * e;
  }
  r.nonsmooth = (x == 0.0 && alpha != 1.0);
  return r;
}

}  // namespace detail

// Value, slope and curvature in one pass. Throws std::domain_error on
// non-finite input.
inline ScalarEval evaluate(const ActivationKind& kind, double x) {
  if (!std::isfinite(x)) throw std::domain_error("activation input must be finite");
  switch (kind.tag) {
    case ActivationTag::TeLU: return detail::telu(x);
    case ActivationTag::ReLU: return detail::relu(x);
    case ActivationTag::GELU: return detail::gelu(x);
    case ActivationTag::SiLU: return detail::silu(x);
    case ActivationTag::Mish: return detail::mish(x);
    case ActivationTag::Logish: return detail::logish(x);
    case ActivationTag::Smish: return detail::smish(x);
    case ActivationTag::ELU: return detail::elu(x, kind.alpha);
  }
  throw UnsupportedOperation("unknown activation tag");
}

inline double eval(const ActivationKind& kind, double x) { return evaluate(kind, x).value; }

// ReLU at exactly 0 returns the subgradient 0; use evaluate() to see the
// nonsmooth flag.
inline double derivative(const ActivationKind& kind, double x) { return evaluate(kind, x).first; }

inline double second_derivative(const ActivationKind& kind, double x) {
  return evaluate(kind, x).second;
}

}  // namespace telu_lab
