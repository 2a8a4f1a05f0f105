// SPDX-License-Identifier: Apache-2.0
//
// Continuous fusedmax. ROF (total variation) smoothing of an even unimodal
// score caps it at a plateau f(a) on (-a, a) and thresholds at tau = f(b);
// Sobolev (L2 derivative) smoothing gives C cosh(beta t) - (F(t) + F(-t)) - tau
// on [-b, b] with beta = gamma^{-1/2}. The discrete counterpart is TV
// denoising by the taut string followed by a sparsemax threshold.
#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sparsedist/error.hpp"
#include "sparsedist/quadrature.hpp"
#include "sparsedist/roots.hpp"
#include "sparsedist/tsallis.hpp"

namespace sparsedist {

enum class ScoreShape { parabola, abs, custom };

/// Even score f, strictly decreasing on (0, inf), with F0(x) = int_0^x f.
struct EvenScore {
  ScoreShape shape = ScoreShape::custom;
  double sigma = 1.0;
  std::function<double(double)> f;
  std::function<double(double)> antiderivative;  // optional

  /// f(t) = -t^2 / (2 sigma^2)
  static EvenScore parabola(double sigma) {
    detail::require(sigma > 0.0, Errc::domain, "sigma must be positive",
                    "EvenScore::parabola");
    const double s2 = sigma * sigma;
    return {ScoreShape::parabola, sigma,
            [s2](double t) { return -0.5 * t * t / s2; },
            [s2](double x) { return -x * x * x / (6.0 * s2); }};
  }
  /// f(t) = -|t| / sigma
  static EvenScore abs(double sigma) {
    detail::require(sigma > 0.0, Errc::domain, "sigma must be positive",
                    "EvenScore::abs");
    return {ScoreShape::abs, sigma,
            [sigma](double t) { return -std::abs(t) / sigma; },
            [sigma](double x) { return -0.5 * x * x / sigma; }};
  }
  static EvenScore from_name(std::string_view name, double sigma) {
    if (name == "parabola") return parabola(sigma);
    if (name == "abs") return abs(sigma);
    throw Error(Errc::parse, "unknown score '" + std::string(name) + "'",
                "EvenScore::from_name");
  }

  double integral(double x) const {
    if (antiderivative) return antiderivative(x);
    return integrate(f, {0.0, x}, {}, {.tol = 1e-13});
  }
};

/// ROF solution [f_a(t) - tau]_+ with f_a = f(a) on (-a, a).
struct PiecewiseDensity {
  double a = 0.0;
  double b = 0.0;
  double tau = 0.0;
  double plateau = 0.0;  // f(a) - tau
  double gamma = 0.0;
  std::function<double(double)> f;

  double pdf(double t) const {
    const double x = std::abs(t);
    if (x >= b) return 0.0;
    if (x < a) return plateau;
    return f(x) - tau;
  }
};

namespace detail {

/// x with -x f(x) + F0(x) = target; the left side is increasing from 0.
inline double rof_root(const EvenScore& s, double target, double scale) {
  if (target == 0.0) return 0.0;
  const auto eq = [&](double x) { return -x * s.f(x) + s.integral(x) - target; };
  return find_root_expanding(eq, 0.0, scale, 1e-15);
}

}  // namespace detail

/// Generic ROF solver: a and b by root finding on the two implicit equations.
inline PiecewiseDensity rof_fusedmax(const EvenScore& s, double gamma) {
  constexpr const char* kCtx = "rof_fusedmax";
  detail::require(gamma >= 0.0 && std::isfinite(gamma), Errc::domain,
                  "gamma must be non-negative", kCtx);
  detail::require(static_cast<bool>(s.f), Errc::domain, "score is empty", kCtx);
  PiecewiseDensity p;
  p.gamma = gamma;
  p.f = s.f;
  p.b = detail::rof_root(s, 0.5 + gamma, 1.0);
  p.a = detail::rof_root(s, gamma, std::max(p.b, 1e-300));
  // Strictly decreasing on (0, b]: a flat score has no unique plateau.
  double prev = s.f(0.0);
  for (int k = 1; k <= 64; ++k) {
    const double v = s.f(p.b * k / 64.0);
    detail::require(v < prev, Errc::domain,
                    "score must be strictly decreasing on (0, inf)", kCtx);
    prev = v;
  }
  p.tau = s.f(p.b);
  p.plateau = s.f(p.a) - p.tau;
  return p;
}

/// Closed forms for the two example scores; falls back to the generic path.
inline PiecewiseDensity rof_fusedmax_closed(const EvenScore& s, double gamma) {
  detail::require(gamma >= 0.0, Errc::domain, "gamma must be non-negative",
                  "rof_fusedmax_closed");
  PiecewiseDensity p;
  p.gamma = gamma;
  p.f = s.f;
  const double sg = s.sigma;
  switch (s.shape) {
    case ScoreShape::parabola:
      p.a = std::cbrt(3.0 * sg * sg * gamma);
      p.b = std::cbrt(1.5 * sg * sg * (1.0 + 2.0 * gamma));
      p.tau = -0.5 * std::pow(1.5 * (1.0 + 2.0 * gamma) / sg, 2.0 / 3.0);
      break;
    case ScoreShape::abs:
      p.a = std::sqrt(2.0 * sg * gamma);
      p.b = std::sqrt(sg * (1.0 + 2.0 * gamma));
      p.tau = -std::sqrt((1.0 + 2.0 * gamma) / sg);
      break;
    case ScoreShape::custom:
      return rof_fusedmax(s, gamma);
  }
  p.plateau = s.f(p.a) - p.tau;
  return p;
}

// ---------------------------------------------------------------------------
// Discrete fusedmax
// ---------------------------------------------------------------------------

/// argmin_u 1/2 ||u - y||^2 + lambda sum |u_i - u_{i-1}|, exactly, by the
/// taut-string walk in Condat's direct form: the string is advanced while
/// it stays inside the tube of radius lambda around the cumulative sum and
/// a segment is emitted whenever the tube forces a kink.
inline std::vector<double> tv_denoise(std::span<const double> y, double lambda) {
  detail::require(lambda >= 0.0, Errc::domain, "lambda must be non-negative",
                  "tv_denoise");
  const int n = static_cast<int>(y.size());
  std::vector<double> out(y.begin(), y.end());
  if (n == 0 || lambda == 0.0) return out;
  int k = 0, k0 = 0, kplus = 0, kminus = 0;
  double umin = lambda, umax = -lambda;
  double vmin = y[0] - lambda, vmax = y[0] + lambda;
  const double two_lambda = 2.0 * lambda;
  while (true) {
    while (k == n - 1) {
      if (umin < 0.0) {
        do out[k0++] = vmin; while (k0 <= kminus);
        k = kminus = k0;
        vmin = y[k0];
        umin = lambda;
        umax = vmin + umin - vmax;
      } else if (umax > 0.0) {
        do out[k0++] = vmax; while (k0 <= kplus);
        k = kplus = k0;
        vmax = y[k0];
        umax = -lambda;
        umin = vmax + umax - vmin;
      } else {
        vmin += umin / (k - k0 + 1);
        do out[k0++] = vmin; while (k0 <= k);
        return out;
      }
    }
    umin += y[k + 1] - vmin;
    if (umin < -lambda) {
      do out[k0++] = vmin; while (k0 <= kminus);
      k = kplus = kminus = k0;
      vmin = y[k0];
      vmax = vmin + two_lambda;
      umin = lambda;
      umax = -lambda;
      continue;
    }
    umax += y[k + 1] - vmax;
    if (umax > lambda) {
      do out[k0++] = vmax; while (k0 <= kplus);
      k = kplus = kminus = k0;
      vmax = y[k0];
      vmin = vmax - two_lambda;
      umin = lambda;
      umax = -lambda;
      continue;
    }
    ++k;
    if (umin >= lambda) {
      kminus = k;
      vmin += (umin - lambda) / (kminus - k0 + 1);
      umin = lambda;
    }
    if (umax <= -lambda) {
      kplus = k;
      vmax += (umax + lambda) / (kplus - k0 + 1);
      umax = -lambda;
    }
  }
}

/// Discretized ROF map on a grid of width h: minimizes
/// h/2 ||p - f||^2 + gamma sum |p_i - p_{i-1}| over {p >= 0, sum p = 1/h}.
/// Returns density values (p_i ~ p(t_i)).
inline std::vector<double> discrete_fusedmax(std::span<const double> f,
                                             double gamma, double h) {
  constexpr const char* kCtx = "discrete_fusedmax";
  detail::require(!f.empty(), Errc::domain, "scores must be non-empty", kCtx);
  detail::require(gamma >= 0.0, Errc::domain, "gamma must be non-negative",
                  kCtx);
  detail::require(h > 0.0, Errc::domain, "grid width must be positive", kCtx);
  std::vector<double> u = tv_denoise(f, gamma / h);
  const double tau = detail::sparsemax_threshold(u, 1.0 / h);
  for (double& v : u) v = std::max(v - tau, 0.0);
  return u;
}

// ---------------------------------------------------------------------------
// Sobolev smoothing
// ---------------------------------------------------------------------------

namespace detail {

/// cosh(x) / sinh(y) for 0 <= |x| <= y, without overflow.
inline double cosh_over_sinh(double x, double y) {
  const double ax = std::abs(x);
  return (std::exp(ax - y) + std::exp(-ax - y)) / -std::expm1(-2.0 * y);
}

}  // namespace detail

/// Smoothed density C cosh(beta t) - (F(t) + F(-t)) - tau on [-b, b].
struct SobolevDensity {
  ScoreShape shape = ScoreShape::parabola;
  double sigma = 1.0;
  double gamma = 1.0;
  double beta = 1.0;
  double b = 0.0;
  double C = 0.0;
  double tau = 0.0;

  /// C cosh(beta t), evaluated as k * cosh(beta t) / sinh(beta b).
  double cosh_term(double t) const {
    return cosh_coefficient() * detail::cosh_over_sinh(beta * t, beta * b);
  }
  /// C sinh(beta b), finite for any beta b.
  double cosh_coefficient() const {
    if (shape == ScoreShape::parabola) return b / (beta * sigma * sigma);
    return -std::expm1(-beta * b) / (sigma * beta);
  }
  /// F(t) + F(-t)
  double particular(double t) const {
    if (shape == ScoreShape::parabola) {
      return t * t / (2.0 * sigma * sigma) + 1.0 / (beta * beta * sigma * sigma);
    }
    const double x = std::abs(t);
    return x / sigma + std::exp(-beta * x) / (beta * sigma);
  }
  double pdf(double t) const {
    if (std::abs(t) > b) return 0.0;
    return std::max(cosh_term(t) - particular(t) - tau, 0.0);
  }
};

namespace detail {

/// Closed-form mass I(b) of the smoothed density with the boundary
/// conditions p(b) = p'(b) = 0 already imposed.
inline double sobolev_mass(ScoreShape shape, double sigma, double beta,
                           double b) {
  const double x = beta * b;
  if (shape == ScoreShape::parabola) {
    const double s2 = sigma * sigma;
    const double coth = 1.0 / std::tanh(x);
    return 2.0 * b / (s2 * beta * beta) - 2.0 * b * b * coth / (s2 * beta) +
           2.0 * b * b * b / (3.0 * s2);
  }
  // 4 b cosh(x) / (beta sigma (e^x + 1)) written with e^{-x} only
  const double e = std::exp(-x);
  const double ratio = (1.0 + e * e) / (1.0 + e);
  return b * b / sigma + 2.0 * b * e / (beta * sigma) -
         2.0 * b * ratio / (beta * sigma);
}

}  // namespace detail

inline SobolevDensity sobolev_smooth(const EvenScore& s, double gamma) {
  constexpr const char* kCtx = "sobolev_smooth";
  detail::require(s.shape == ScoreShape::parabola || s.shape == ScoreShape::abs,
                  Errc::unsupported,
                  "Sobolev smoothing supports the parabola and abs scores",
                  kCtx);
  detail::require(gamma > 0.0 && std::isfinite(gamma), Errc::domain,
                  "gamma must be positive", kCtx);
  SobolevDensity p;
  p.shape = s.shape;
  p.sigma = s.sigma;
  p.gamma = gamma;
  p.beta = 1.0 / std::sqrt(gamma);
  const auto eq = [&](double b) {
    return detail::sobolev_mass(p.shape, p.sigma, p.beta, b) - 1.0;
  };
  // I(b) grows from 0; start below the unsmoothed support half-width.
  const double start = 0.25 * rof_fusedmax_closed(s, 0.0).b;
  double lo = start;
  while (eq(lo) >= 0.0) {
    lo *= 0.5;
    detail::require(lo > 1e-12 * start, Errc::no_bracket,
                    "Sobolev mass equation has no lower bracket", kCtx);
  }
  p.b = find_root_expanding(eq, lo, 2.0 * start + lo, 1e-15);
  const double x = p.beta * p.b;
  p.C = x > 700.0 ? 0.0 : p.cosh_coefficient() / std::sinh(x);
  // p(b) = 0
  p.tau = p.cosh_coefficient() / std::tanh(x) - p.particular(p.b);
  return p;
}

}  // namespace sparsedist
