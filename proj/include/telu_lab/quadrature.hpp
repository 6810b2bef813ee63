#pragma once

// Quadrature rules, scan-then-bisect root finding and golden-section search.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace telu_lab::quad {

struct Rule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre rule on [-1, 1], nodes by Newton iteration on the
// three-term recurrence.
inline Rule gauss_legendre(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_legendre: n must be positive");
  Rule r{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  for (std::size_t i = 0; i < half; ++i) {
    double z = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / static_cast<double>(j);
      }
      dp = static_cast<double>(n) * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.nodes[i] = -z;
    r.nodes[n - 1 - i] = z;
    r.weights[i] = w;
    r.weights[n - 1 - i] = w;
  }
  return r;
}

// n-point Gauss-Hermite rule for weight e^{-t^2} on the real line
// (orthonormal recurrence, Newton refinement).
inline Rule gauss_hermite(std::size_t n) {
  if (n == 0) throw std::invalid_argument("gauss_hermite: n must be positive");
  const double pim4 = 0.7511255444649425;  // pi^{-1/4}
  Rule r{std::vector<double>(n), std::vector<double>(n)};
  const std::size_t half = (n + 1) / 2;
  const double nd = static_cast<double>(n);
  double z = 0.0;
  for (std::size_t i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * r.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * r.nodes[1];
    } else {
      z = 2.0 * z - r.nodes[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    r.nodes[i] = z;
    r.nodes[n - 1 - i] = -z;
    r.weights[i] = 2.0 / (pp * pp);
    r.weights[n - 1 - i] = r.weights[i];
  }
  // Nodes were produced in descending order; flip to ascending.
  std::reverse(r.nodes.begin(), r.nodes.end());
  std::reverse(r.weights.begin(), r.weights.end());
  return r;
}

inline double apply_rule(const Rule& rule, const std::function<double(double)>& f, double lo, double hi) {
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  double sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return half * sum;
}

struct IntegrationResult {
  double value = 0.0;
  std::size_t panels = 0;  // per segment, at convergence
  bool converged = false;
};

// Composite Gauss-Legendre over [lo, hi], split at `breaks` (points where the
// integrand has a kink). Panels per segment double until two successive
// totals differ by less than rel_tol relative (abs_floor absolute).
inline IntegrationResult integrate(const std::function<double(double)>& f, double lo, double hi,
                                   std::span<const double> breaks = {}, double rel_tol = 1e-10,
                                   double abs_floor = 1e-300, std::size_t order = 20,
                                   std::size_t max_panels = 1u << 14) {
  if (!(hi > lo)) throw std::invalid_argument("integrate: need lo < hi");
  static thread_local std::size_t cached_order = 0;
  static thread_local Rule rule;
  if (cached_order != order) {
    rule = gauss_legendre(order);
    cached_order = order;
  }
  std::vector<double> edges{lo};
  std::vector<double> sorted(breaks.begin(), breaks.end());
  std::sort(sorted.begin(), sorted.end());
  for (double b : sorted)
    if (b > edges.back() && b < hi) edges.push_back(b);
  edges.push_back(hi);

  auto composite = [&](std::size_t panels) {
    double total = 0.0;
    for (std::size_t s = 0; s + 1 < edges.size(); ++s) {
      const double a = edges[s], b = edges[s + 1];
      const double w = (b - a) / static_cast<double>(panels);
      for (std::size_t p = 0; p < panels; ++p) {
        const double pa = a + w * static_cast<double>(p);
        const double pb = (p + 1 == panels) ? b : a + w * static_cast<double>(p + 1);
        total += apply_rule(rule, f, pa, pb);
      }
    }
    return total;
  };

  IntegrationResult res;
  std::size_t panels = 1;
  double prev = composite(panels);
  while (panels < max_panels) {
    panels *= 2;
    const double cur = composite(panels);
    if (std::abs(cur - prev) <= std::max(rel_tol * std::abs(cur), abs_floor)) {
      return {cur, panels, true};
    }
    prev = cur;
  }
  res.value = prev;
  res.panels = panels;
  return res;
}

// Uniform grid lo..hi inclusive with n >= 2 points; endpoints exact.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n < 2) throw std::invalid_argument("linspace: need at least two samples");
  std::vector<double> xs(n);
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) xs[i] = lo + step * static_cast<double>(i);
  xs.back() = hi;
  return xs;
}

// Bisection on a bracket with f(lo), f(hi) of opposite sign (or one zero).
inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
  double flo = f(lo);
  if (flo == 0.0) return lo;
  if (f(hi) == 0.0) return hi;
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Sign changes of f along a grid of `samples` points, each refined by
// bisection to `tol`. Exact zeros on grid points count once.
inline std::vector<double> scan_roots(const std::function<double(double)>& f, double lo, double hi,
                                      std::size_t samples, double tol) {
  std::vector<double> roots;
  const auto xs = linspace(lo, hi, samples);
  double prev = f(xs[0]);
  if (prev == 0.0) roots.push_back(xs[0]);
  for (std::size_t i = 1; i < xs.size(); ++i) {
    const double cur = f(xs[i]);
    if (cur == 0.0) {
      roots.push_back(xs[i]);
    } else if (prev != 0.0 && ((prev < 0.0) != (cur < 0.0))) {
      roots.push_back(bisect(f, xs[i - 1], xs[i], tol));
    }
    prev = cur;
  }
  return roots;
}

struct Extremum {
  double x = 0.0;
  double value = 0.0;
};

// Golden-section search for a maximum of a unimodal f on [lo, hi].
inline Extremum golden_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  const double x = 0.5 * (a + b);
  return {x, f(x)};
}

}  // namespace telu_lab::quad
