// SPDX-License-Identifier: Apache-2.0
//
// Adaptive Simpson quadrature with explicit kink points, plus helpers for
// unbounded ranges and periodic integrands.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "sparsedist/error.hpp"
#include "sparsedist/special.hpp"

namespace sparsedist {

struct QuadratureOptions {
  double tol = 1e-10;
  int max_depth = 50;
  int max_evaluations = 20'000'000;
};

namespace detail {

template <class F>
struct SimpsonState {
  F& f;
  int evaluations = 0;
  int max_evaluations = 0;
  bool exhausted = false;
};

template <class F>
double simpson_recurse(SimpsonState<F>& st, double a, double b, double fa,
                       double fm, double fb, double whole, double tol,
                       int level, int max_level) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = st.f(lm);
  const double frm = st.f(rm);
  st.evaluations += 2;
  const double h = b - a;
  const double left = h / 12.0 * (fa + 4.0 * flm + fm);
  const double right = h / 12.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (st.evaluations > st.max_evaluations) st.exhausted = true;
  if (level >= max_level || st.exhausted) {
    return left + right + delta / 15.0;
  }
  // Require a few levels before trusting the error estimate; a coarse grid can
  // alias a narrow feature into an exact-looking zero error.
  if (level >= 2 && std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_recurse(st, a, m, fa, flm, fm, left, 0.5 * tol, level + 1,
                         max_level) +
         simpson_recurse(st, m, b, fm, frm, fb, right, 0.5 * tol, level + 1,
                         max_level);
}

template <class F>
double simpson_segment(F& f, double a, double b, double tol,
                       const QuadratureOptions& opt, int& evaluations) {
  if (a == b) return 0.0;
  SimpsonState<F> st{f, 0, opt.max_evaluations - evaluations, false};
  // Seed with a uniform pre-split so smooth-but-narrow bumps are not missed.
  constexpr int kSeed = 8;
  double total = 0.0;
  const double h = (b - a) / kSeed;
  for (int i = 0; i < kSeed; ++i) {
    const double lo = a + i * h;
    const double hi = (i + 1 == kSeed) ? b : a + (i + 1) * h;
    const double flo = f(lo);
    const double fmid = f(0.5 * (lo + hi));
    const double fhi = f(hi);
    st.evaluations += 3;
    const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    total += simpson_recurse(st, lo, hi, flo, fmid, fhi, whole, tol / kSeed,
                             0, opt.max_depth);
  }
  evaluations += st.evaluations;
  if (st.exhausted) {
    throw Error(Errc::no_convergence,
                "adaptive quadrature exceeded its subdivision budget",
                "integrate");
  }
  return total;
}

}  // namespace detail

/// Integral of f over a finite range with absolute error target opt.tol.
/// Kink points inside the range split it so that C0 densities (support
/// boundaries, plateau corners) are integrated piecewise-smoothly.
template <class F>
double integrate(F&& f, Interval range, std::span<const double> kinks = {},
                 QuadratureOptions opt = {}) {
  detail::require(range.bounded(), Errc::domain,
                  "integrate needs a finite interval; use integrate_line",
                  "integrate");
  if (range.hi <= range.lo) return 0.0;
  std::vector<double> cuts{range.lo};
  for (double k : kinks) {
    if (k > range.lo && k < range.hi) cuts.push_back(k);
  }
  cuts.push_back(range.hi);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  const double total_width = range.hi - range.lo;
  int evaluations = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const double share = opt.tol * (cuts[i + 1] - cuts[i]) / total_width;
    sum += detail::simpson_segment(f, cuts[i], cuts[i + 1], share, opt,
                                   evaluations);
  }
  return sum;
}

/// Integral over a possibly unbounded interval. Infinite ends are mapped
/// through t = c + s / (1 - s^2) onto (-1, 1).
template <class F>
double integrate_line(F&& f, Interval range, std::span<const double> kinks = {},
                      QuadratureOptions opt = {}) {
  if (range.bounded()) return integrate(f, range, kinks, opt);
  const auto mapped = [&](double s) {
    const double d = 1.0 - s * s;
    if (d <= 0.0) return 0.0;
    const double t = s / d;
    const double jac = (1.0 + s * s) / (d * d);
    const double v = f(t) * jac;
    return std::isfinite(v) ? v : 0.0;
  };
  const auto to_s = [](double t) {
    if (std::isinf(t)) return t > 0 ? 1.0 : -1.0;
    if (t == 0.0) return 0.0;
    return (std::sqrt(1.0 + 4.0 * t * t) - 1.0) / (2.0 * t);
  };
  std::vector<double> mapped_kinks;
  for (double k : kinks) mapped_kinks.push_back(to_s(k));
  return integrate(mapped, {to_s(range.lo), to_s(range.hi)}, mapped_kinks,
                   opt);
}

/// Trapezoid rule with n equally spaced nodes on [0, 2 pi); spectrally
/// accurate for smooth periodic integrands.
template <class F>
double integrate_periodic(F&& f, int nodes) {
  const double h = 2.0 * std::numbers::pi / nodes;
  double sum = 0.0;
  for (int k = 0; k < nodes; ++k) sum += f(k * h);
  return sum * h;
}

}  // namespace sparsedist
