// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <algorithm>
#include <limits>

#include "sparsedist/error.hpp"
#include "sparsedist/special.hpp"

namespace sparsedist {

/// Bracketed root of a continuous function by Brent's method: inverse
/// quadratic / secant steps safeguarded by bisection. Stops when |f(x)| <= tol
/// or the bracket is narrower than tol. Deterministic for a given f and
/// bracket.
template <class F>
double find_root(F&& f, Interval bracket, double tol = 1e-14) {
  constexpr const char* kCtx = "find_root";
  double a = bracket.lo;
  double b = bracket.hi;
  detail::require(std::isfinite(a) && std::isfinite(b) && a <= b, Errc::domain,
                  "root bracket must be finite with lo <= hi", kCtx);
  double fa = f(a);
  double fb = f(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  detail::require(std::signbit(fa) != std::signbit(fb), Errc::no_bracket,
                  "no sign change in root bracket", kCtx);

  double c = a, fc = fa;
  double d = b - a, e = d;
  for (int iter = 0; iter < 500; ++iter) {
    if (std::signbit(fb) == std::signbit(fc)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::abs(fc) < std::abs(fb)) {
      a = b; b = c; c = a;
      fa = fb; fb = fc; fc = fa;
    }
    const double eps = 2.0 * std::numeric_limits<double>::epsilon() *
                           std::abs(b) + 0.5 * tol;
    const double m = 0.5 * (c - b);
    if (std::abs(fb) <= tol || std::abs(m) <= eps) return b;

    if (std::abs(e) >= eps && std::abs(fa) > std::abs(fb)) {
      double p, q;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * m * s;
        q = 1.0 - s;
      } else {
        const double qa = fa / fc;
        const double r = fb / fc;
        p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
        q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0.0) q = -q; else p = -p;
      if (2.0 * p < std::min(3.0 * m * q - std::abs(eps * q),
                             std::abs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = m;
        e = m;
      }
    } else {
      d = m;
      e = m;
    }
    a = b;
    fa = fb;
    b += std::abs(d) > eps ? d : std::copysign(eps, m);
    fb = f(b);
  }
  throw Error(Errc::no_convergence, "root finder did not converge", kCtx);
}

/// Grows [lo, hi] geometrically away from lo until f changes sign, then
/// returns the root. Used where only one side of the bracket is known.
template <class F>
double find_root_expanding(F&& f, double lo, double hi, double tol = 1e-14,
                           int max_doublings = 60) {
  const double flo = f(lo);
  for (int i = 0; i <= max_doublings; ++i) {
    if (std::signbit(f(hi)) != std::signbit(flo) || f(hi) == 0.0) {
      return find_root(f, {lo, hi}, tol);
    }
    hi = lo + 2.0 * (hi - lo);
  }
  throw Error(Errc::no_bracket, "no sign change found while expanding bracket",
              "find_root_expanding");
}

}  // namespace sparsedist
