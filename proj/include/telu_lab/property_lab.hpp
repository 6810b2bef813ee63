#pragma once
/*
 * Numerical verification of analytic claims about activation functions:
 * derivative consistency, derivative roots, Lipschitz constants, output
 * bounds, interval and Gaussian means, saturation and derivative
 * smoothness. Each check returns either a number or a PropertyReport; the
 * verify_* functions assemble the claim-by-claim report that the CLI writes.
 *
 * Everything here is a deterministic, single-threaded scan.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "telu_lab/activation.hpp"
#include "telu_lab/quadrature.hpp"

namespace telu_lab {

struct Interval {
  double lo;
  double hi;
  std::size_t samples;

  Interval(double lo_, double hi_, std::size_t samples_ = 10001) : lo(lo_), hi(hi_), samples(samples_) {
    if (!(lo < hi)) throw std::invalid_argument("Interval: lo must be < hi");
    if (samples < 2) throw std::invalid_argument("Interval: need at least 2 samples");
  }

  // Symmetric interval [-a, a].
  static Interval symmetric(double a, std::size_t samples = 10001) { return Interval(-a, a, samples); }

  std::vector<double> grid() const { return quad::linspace(lo, hi, samples); }
  double step() const { return (hi - lo) / static_cast<double>(samples - 1); }
};

enum class Verdict { holds, fails, holds_with_caveat };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::holds: return "holds";
    case Verdict::fails: return "fails";
    case Verdict::holds_with_caveat: return "holds_with_caveat";
  }
  return "?";
}

// Counterexample location or extremal point; a pair when the claim is
// two-dimensional (e.g. interval half-width and the mean measured there).
struct Witness {
  double first = 0.0;
  std::optional<double> second;
};

struct PropertyReport {
  std::string claim_id;
  Verdict verdict = Verdict::holds;
  std::optional<Witness> witness;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
};

// ---------------------------------------------------------------------------
// Derivative checks

// Max relative error of the closed-form f' against the central difference
// (f(x+h) - f(x-h)) / 2h on the grid; absolute error where |f'| < 1e-8.
// Kinked kinds skip grid points within 2h of the kink and carry a caveat.
inline PropertyReport grad_consistency(const ActivationKind& kind, const Interval& iv, double h = 1e-5) {
  if (!(h > 0.0)) throw std::invalid_argument("grad_consistency: h must be positive");
  PropertyReport rep{"grad_consistency", Verdict::holds, std::nullopt, 0.0, 1e-5, {}};
  bool skipped = false;
  double worst_x = iv.lo;
  for (double x : iv.grid()) {
    if (kind.has_kink() && std::abs(x) < 2.0 * h) {
      skipped = true;
      continue;
    }
    const double fd = (eval(kind, x + h) - eval(kind, x - h)) / (2.0 * h);
    const double d = derivative(kind, x);
    const double err = std::abs(d) < 1e-8 ? std::abs(fd - d) : std::abs(fd - d) / std::abs(d);
    if (err > rep.measured) {
      rep.measured = err;
      worst_x = x;
    }
  }
  rep.witness = Witness{worst_x, std::nullopt};
  if (rep.measured >= rep.tolerance) {
    rep.verdict = Verdict::fails;
  } else if (skipped) {
    rep.verdict = Verdict::holds_with_caveat;
    rep.note = "kink at x = 0 excluded from the comparison";
  }
  return rep;
}

// Same comparison one order up: closed-form f'' against the central
// difference of f'. Error is |a - b| / max(1, |f''|).
inline PropertyReport curvature_consistency(const ActivationKind& kind, const Interval& iv, double h = 1e-4) {
  if (!(h > 0.0)) throw std::invalid_argument("curvature_consistency: h must be positive");
  PropertyReport rep{"curvature_consistency", Verdict::holds, std::nullopt, 0.0, 1e-4, {}};
  bool skipped = false;
  double worst_x = iv.lo;
  for (double x : iv.grid()) {
    if ((kind.tag == ActivationTag::ReLU || kind.tag == ActivationTag::ELU) && std::abs(x) < 2.0 * h) {
      skipped = true;  // f'' jumps at 0 for both
      continue;
    }
    const double fd = (derivative(kind, x + h) - derivative(kind, x - h)) / (2.0 * h);
    const double d2 = second_derivative(kind, x);
    const double err = std::abs(fd - d2) / std::max(1.0, std::abs(d2));
    if (err > rep.measured) {
      rep.measured = err;
      worst_x = x;
    }
  }
  rep.witness = Witness{worst_x, std::nullopt};
  if (rep.measured >= rep.tolerance) {
    rep.verdict = Verdict::fails;
  } else if (skipped) {
    rep.verdict = Verdict::holds_with_caveat;
    rep.note = "second-derivative jump at x = 0 excluded from the comparison";
  }
  return rep;
}

// Every point in iv where f' changes sign, bisected to tol. The scan runs at
// iv.samples resolution; an empty result means no sign change was seen.
inline std::vector<double> find_derivative_roots(const ActivationKind& kind, const Interval& iv, double tol = 1e-10) {
  if (!(tol > 0.0)) throw std::invalid_argument("find_derivative_roots: tol must be positive");
  return quad::scan_roots([&](double x) { return derivative(kind, x); }, iv.lo, iv.hi, iv.samples, tol);
}

struct LipschitzEstimate {
  double grid_value = 0.0;  // max |f'| on the grid
  double grid_argmax = 0.0;
  double value = 0.0;  // after golden-section refinement
  double argmax = 0.0;
};

// sup |f'| over iv: dense scan, then golden-section search on the two grid
// cells around the scan maximum.
inline LipschitzEstimate lipschitz_estimate(const ActivationKind& kind, const Interval& iv = Interval(-10.0, 10.0)) {
  const auto xs = iv.grid();
  auto slope = [&](double x) { return std::abs(derivative(kind, x)); };
  LipschitzEstimate est;
  std::size_t best = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double v = slope(xs[i]);
    if (v > est.grid_value) {
      est.grid_value = v;
      best = i;
    }
  }
  est.grid_argmax = xs[best];
  const double a = xs[best == 0 ? 0 : best - 1];
  const double b = xs[std::min(best + 1, xs.size() - 1)];
  const auto ext = quad::golden_max(slope, a, b, 1e-12);
  if (ext.value >= est.grid_value) {
    est.value = ext.value;
    est.argmax = ext.x;
  } else {
    est.value = est.grid_value;
    est.argmax = est.grid_argmax;
  }
  return est;
}

// ---------------------------------------------------------------------------
// Output bounds and saturation

// |f(x)| <= |x| + 1e-12 at every grid point; witness is the point where
// |f(x)| - |x| is largest.
inline PropertyReport bounded_output_scan(const ActivationKind& kind, const Interval& iv) {
  constexpr double kSlack = 1e-12;
  PropertyReport rep{"thm4_bounded_output", Verdict::holds, std::nullopt, -std::numeric_limits<double>::infinity(),
                     kSlack, {}};
  double worst_x = iv.lo;
  for (double x : iv.grid()) {
    const double excess = std::abs(eval(kind, x)) - std::abs(x);
    if (excess > rep.measured) {
      rep.measured = excess;
      worst_x = x;
    }
  }
  rep.witness = Witness{worst_x, std::nullopt};
  if (rep.measured > kSlack) rep.verdict = Verdict::fails;
  return rep;
}

struct SaturationProfile {
  double pos_gap = 0.0;    // max |f(x) - x| on [10, 30]
  double neg_limit = 0.0;  // max |f(x)| on [-30, -10]
};

inline SaturationProfile saturation_profile(const ActivationKind& kind, std::size_t samples = 10001) {
  SaturationProfile p;
  for (double x : quad::linspace(10.0, 30.0, samples)) p.pos_gap = std::max(p.pos_gap, std::abs(eval(kind, x) - x));
  for (double x : quad::linspace(-30.0, -10.0, samples)) p.neg_limit = std::max(p.neg_limit, std::abs(eval(kind, x)));
  return p;
}

// ---------------------------------------------------------------------------
// Means under symmetric input laws

// (1 / 2a) * integral of f over [-a, a]: composite Gauss-Legendre split at 0.
inline double interval_mean(const ActivationKind& kind, double a) {
  if (!(a > 0.0)) throw std::invalid_argument("interval_mean: a must be positive");
  const double zero[] = {0.0};
  const auto res = quad::integrate([&](double x) { return eval(kind, x); }, -a, a, zero, 1e-12, 1e-300);
  return res.value / (2.0 * a);
}

// E[f(X)] for X ~ Normal(0, sigma^2). The Gaussian-weighted integrand is
// integrated by composite Gauss-Legendre over [-14 sigma, 14 sigma] split at
// 0; the neglected tails are below 1e-40 relative.
inline double gaussian_mean(const ActivationKind& kind, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_mean: sigma must be positive");
  const double norm = 1.0 / (sigma * std::sqrt(2.0 * std::numbers::pi));
  auto integrand = [&](double x) {
    const double z = x / sigma;
    return eval(kind, x) * norm * std::exp(-0.5 * z * z);
  };
  const double L = 14.0 * sigma;
  const double breaks[] = {-sigma, 0.0, sigma};
  return quad::integrate(integrand, -L, L, breaks, 1e-13, 1e-300).value;
}

// Plain Gauss-Hermite estimate of the same expectation. Converges
// geometrically only for integrands analytic in a wide strip, so it serves as
// a cross-check at small sigma rather than as the primary route.
inline double gauss_hermite_mean(const ActivationKind& kind, double sigma, std::size_t nodes = 64) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gauss_hermite_mean: sigma must be positive");
  const auto rule = quad::gauss_hermite(nodes);
  double sum = 0.0;
  for (std::size_t i = 0; i < nodes; ++i)
    sum += rule.weights[i] * eval(kind, std::numbers::sqrt2 * sigma * rule.nodes[i]);
  return sum / std::sqrt(std::numbers::pi);
}

// ---------------------------------------------------------------------------
// Derivative smoothness

struct SensitivityRow {
  ActivationKind kind;
  double sup_abs_derivative = 0.0;
  double derivative_oscillation = 0.0;  // total variation of f' on the grid
};

// Rows sorted ascending by (sup |f'|, total variation of f').
inline std::vector<SensitivityRow> sensitivity_ranking(const std::vector<ActivationKind>& kinds, const Interval& iv) {
  if (kinds.empty()) throw std::invalid_argument("sensitivity_ranking: no kinds given");
  const auto xs = iv.grid();
  std::vector<SensitivityRow> rows;
  for (const auto& kind : kinds) {
    SensitivityRow row{kind};
    double prev = derivative(kind, xs[0]);
    row.sup_abs_derivative = std::abs(prev);
    for (std::size_t i = 1; i < xs.size(); ++i) {
      const double d = derivative(kind, xs[i]);
      row.sup_abs_derivative = std::max(row.sup_abs_derivative, std::abs(d));
      row.derivative_oscillation += std::abs(d - prev);
      prev = d;
    }
    rows.push_back(row);
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SensitivityRow& a, const SensitivityRow& b) {
    if (a.sup_abs_derivative != b.sup_abs_derivative) return a.sup_abs_derivative < b.sup_abs_derivative;
    return a.derivative_oscillation < b.derivative_oscillation;
  });
  return rows;
}

// Largest change of f' between neighbouring grid points.
inline double max_derivative_jump(const ActivationKind& kind, const Interval& iv) {
  const auto xs = iv.grid();
  double prev = derivative(kind, xs[0]), worst = 0.0;
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double d = derivative(kind, xs[i]);
    worst = std::max(worst, std::abs(d - prev));
    prev = d;
  }
  return worst;
}

// A point c in (a, b) with f'(c) equal to the secant slope, or nullopt when
// no sign change of f' - slope shows up on the scan.
inline std::optional<double> mean_value_point(const ActivationKind& kind, double a, double b, std::size_t samples = 2001) {
  if (!(a < b)) throw std::invalid_argument("mean_value_point: need a < b");
  const double slope = (eval(kind, b) - eval(kind, a)) / (b - a);
  auto g = [&](double x) { return derivative(kind, x) - slope; };
  const double span = b - a;
  const auto roots = quad::scan_roots(g, a + 1e-9 * span, b - 1e-9 * span, samples, 1e-13 * std::max(1.0, span));
  if (roots.empty()) return std::nullopt;
  return roots.front();
}

// ---------------------------------------------------------------------------
// Claim-by-claim reports

namespace detail {

inline PropertyReport prefixed(const ActivationKind& kind, PropertyReport rep) {
  rep.claim_id = to_string(kind) + "." + rep.claim_id;
  return rep;
}

inline std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

}  // namespace detail

// Checks that apply to every activation.
inline std::vector<PropertyReport> verify_common(const ActivationKind& kind) {
  std::vector<PropertyReport> out;
  out.push_back(detail::prefixed(kind, grad_consistency(kind, Interval(-5.0, 5.0, 1001), 1e-5)));
  out.push_back(detail::prefixed(kind, curvature_consistency(kind, Interval(-5.0, 5.0, 1001), 1e-4)));
  out.push_back(detail::prefixed(kind, bounded_output_scan(kind, Interval(-50.0, 50.0, 10001))));

  const auto lip = lipschitz_estimate(kind, Interval(-10.0, 10.0, 10001));
  PropertyReport rep{"thm6_lipschitz", Verdict::holds, Witness{lip.argmax, std::nullopt}, lip.value, 1.0 + 1e-9, {}};
  const double stability = std::abs(lip.value - lip.grid_value);
  if (!std::isfinite(lip.value) || stability > 1e-3) {
    rep.verdict = Verdict::fails;
    rep.note = detail::fmt("sup|f'| estimate unstable: grid %.9g vs refined %.9g", lip.grid_value, lip.value);
  } else if (lip.value > rep.tolerance) {
    rep.verdict = Verdict::holds_with_caveat;
    rep.note = detail::fmt("Lipschitz with L = %.9g attained at x = %.6g; the constant exceeds 1", lip.value,
                           lip.argmax);
  }
  out.push_back(detail::prefixed(kind, rep));
  return out;
}

// TeLU-specific claims: non-vanishing gradient, saturation, mean shift,
// robustness relative to ReLU and continuity of f and f'.
inline std::vector<PropertyReport> verify_telu_claims() {
  const ActivationKind telu = ActivationKind::telu();
  std::vector<PropertyReport> out;

  {
    const auto roots = find_derivative_roots(telu, Interval(0.0, 50.0, 50001), 1e-10);
    double min_slope = std::numeric_limits<double>::infinity();
    for (double x : quad::linspace(0.0, 50.0, 50001)) min_slope = std::min(min_slope, derivative(telu, x));
    PropertyReport rep{"thm1_nonvanishing_nonnegative_axis", roots.empty() ? Verdict::holds : Verdict::fails,
                       std::nullopt, min_slope, 0.0, "min f' on [0, 50]"};
    if (!roots.empty()) rep.witness = Witness{roots.front(), std::nullopt};
    out.push_back(detail::prefixed(telu, rep));
  }
  {
    const auto roots = find_derivative_roots(telu, Interval(-50.0, 50.0, 100001), 1e-10);
    PropertyReport rep{"thm1_nonvanishing_everywhere", roots.empty() ? Verdict::holds : Verdict::fails,
                       std::nullopt, static_cast<double>(roots.size()), 0.0, {}};
    if (!roots.empty()) {
      rep.witness = Witness{roots.front(), std::nullopt};
      rep.note = detail::fmt("f' changes sign at x = %.12g (f'(-1.0) = %.6g, f'(-1.2) = %.6g); measured = number of roots",
                             roots.front(), derivative(telu, -1.0), derivative(telu, -1.2));
    }
    out.push_back(detail::prefixed(telu, rep));
  }
  {
    const auto sat = saturation_profile(telu);
    out.push_back(detail::prefixed(
        telu, PropertyReport{"thm2_controlled_growth", sat.pos_gap < 1e-8 ? Verdict::holds : Verdict::fails,
                             std::nullopt, sat.pos_gap, 1e-8, "max |f(x) - x| on [10, 30]"}));
    out.push_back(detail::prefixed(
        telu, PropertyReport{"thm2_negative_saturation", sat.neg_limit < 1e-3 ? Verdict::holds : Verdict::fails,
                             std::nullopt, sat.neg_limit, 1e-3, "max |f(x)| on [-30, -10]"}));
    const auto lip = lipschitz_estimate(telu, Interval(-50.0, 50.0, 100001));
    out.push_back(detail::prefixed(
        telu, PropertyReport{"thm2_bounded_derivative", std::isfinite(lip.value) ? Verdict::holds : Verdict::fails,
                             Witness{lip.argmax, std::nullopt}, lip.value, std::numeric_limits<double>::max(),
                             "sup |f'| on [-50, 50]"}));
  }
  {
    // Literal limit claim: (1/2a) * integral over [-a, a] -> 0.
    const double as[] = {2.0, 8.0, 32.0, 128.0};
    double last_mean = 0.0, last_ratio = 0.0;
    std::string trail;
    for (double a : as) {
      last_mean = interval_mean(telu, a);
      last_ratio = last_mean / (a / 4.0);
      if (!trail.empty()) trail += "; ";
      trail += detail::fmt("a=%g: mean=%.10g ratio_to_a/4=%.10g", a, last_mean, last_ratio);
    }
    const bool vanishes = std::abs(last_mean) < 1e-3;
    PropertyReport rep{"thm3_interval_mean_limit", vanishes ? Verdict::holds : Verdict::fails,
                       Witness{as[3], last_mean}, last_mean, 1e-3, trail};
    out.push_back(detail::prefixed(telu, rep));
  }
  {
    const ActivationKind relu = ActivationKind::relu();
    double worst_ratio = 0.0, worst_sigma = 0.0;
    std::string trail;
    for (double s : {0.5, 1.0, 2.0, 4.0}) {
      const double t = gaussian_mean(telu, s);
      const double r = gaussian_mean(relu, s);
      const double ratio = std::abs(t) / r;
      trail += detail::fmt("sigma=%g: telu=%.10g relu=%.10g; ", s, t, r);
      if (ratio > worst_ratio) {
        worst_ratio = ratio;
        worst_sigma = s;
      }
    }
    out.push_back(detail::prefixed(
        telu, PropertyReport{"thm3_gaussian_mean_shift", worst_ratio < 1.0 ? Verdict::holds : Verdict::fails,
                             Witness{worst_sigma, std::nullopt}, worst_ratio, 1.0,
                             "max over sigma of |E f(X)| / E relu(X), X ~ N(0, sigma^2); " + trail}));
  }
  {
    const Interval fine(-5.0, 5.0, 10001);
    const double telu_jump = max_derivative_jump(telu, fine);
    const double relu_jump = max_derivative_jump(ActivationKind::relu(), fine);
    const double telu_sup = lipschitz_estimate(telu).value;
    Verdict v = telu_jump < relu_jump ? Verdict::holds_with_caveat : Verdict::fails;
    out.push_back(detail::prefixed(
        telu, PropertyReport{"thm5_robustness_vs_relu", v, std::nullopt, telu_jump, relu_jump,
                             detail::fmt("largest f' jump between neighbouring points (step 1e-3): telu %.6g, relu "
                                         "%.6g; but sup|f'| is %.9g for telu vs 1 for relu",
                                         telu_jump, relu_jump, telu_sup)}));
  }
  {
    // Continuity of f and f' plus mean-value points on a fixed set of intervals.
    const Interval fine(-10.0, 10.0, 200001);
    const double jump = max_derivative_jump(telu, fine);
    const double pairs[][2] = {{-10.0, 10.0}, {-3.0, -0.5}, {-1.5, -0.8}, {0.0, 1.0}, {0.5, 25.0}, {-40.0, -20.0}};
    double worst_gap = 0.0;
    std::optional<Witness> missing;
    for (const auto& p : pairs) {
      const auto c = mean_value_point(telu, p[0], p[1]);
      if (!c) {
        missing = Witness{p[0], p[1]};
        continue;
      }
      const double slope = (eval(telu, p[1]) - eval(telu, p[0])) / (p[1] - p[0]);
      worst_gap = std::max(worst_gap, std::abs(derivative(telu, *c) - slope));
    }
    const bool ok = !missing && jump < 1e-3 && worst_gap < 1e-8;
    if (!ok && !missing) missing = Witness{fine.lo, fine.hi};
    PropertyReport rep{"continuity_ivt_mvt", ok ? Verdict::holds : Verdict::fails, missing,
                       std::max(jump, worst_gap), 1e-3,
                       detail::fmt("max f' jump at step 1e-4: %.3g; worst |f'(c) - secant| over MVT points: %.3g", jump,
                                   worst_gap)};
    out.push_back(detail::prefixed(telu, rep));
  }
  return out;
}

// ReLU interval mean equals a/4 for every a.
inline std::vector<PropertyReport> verify_relu_claims() {
  const ActivationKind relu = ActivationKind::relu();
  double worst = 0.0, worst_a = 0.0;
  for (double a : {1.0, 4.0, 8.0, 100.0}) {
    const double err = std::abs(interval_mean(relu, a) - a / 4.0) / (a / 4.0);
    if (err >= worst) {
      worst = err;
      worst_a = a;
    }
  }
  return {detail::prefixed(relu, PropertyReport{"relu_interval_mean", worst < 1e-9 ? Verdict::holds : Verdict::fails,
                                                Witness{worst_a, std::nullopt}, worst, 1e-9,
                                                "max relative deviation of the interval mean from a/4, a in {1,4,8,100}"})};
}

inline std::vector<PropertyReport> verify_activation(const ActivationKind& kind) {
  auto out = verify_common(kind);
  std::vector<PropertyReport> extra;
  if (kind.tag == ActivationTag::TeLU) extra = verify_telu_claims();
  if (kind.tag == ActivationTag::ReLU) extra = verify_relu_claims();
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const PropertyReport& rep) {
  nlohmann::json j;
  j["claim_id"] = rep.claim_id;
  j["verdict"] = to_string(rep.verdict);
  if (!rep.witness) {
    j["witness"] = nullptr;
  } else if (rep.witness->second) {
    j["witness"] = {rep.witness->first, *rep.witness->second};
  } else {
    j["witness"] = rep.witness->first;
  }
  j["measured"] = rep.measured;
  j["tolerance"] = rep.tolerance;
  if (!rep.note.empty()) j["note"] = rep.note;
  return j;
}

inline nlohmann::json to_json(const std::vector<PropertyReport>& reps) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reps) arr.push_back(to_json(r));
  return arr;
}

inline nlohmann::json to_json(const std::vector<SensitivityRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows)
    arr.push_back({{"activation", to_string(r.kind)},
                   {"sup_abs_derivative", r.sup_abs_derivative},
                   {"derivative_oscillation", r.derivative_oscillation}});
  return arr;
}

}  // namespace telu_lab
