// SPDX-License-Identifier: Apache-2.0
//
// Scalar special functions: deformed exponential/logarithm, log-gamma, and
// closed-form truncated moments of the standard normal.
#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "sparsedist/error.hpp"

namespace sparsedist {

/// Integration bounds. Either end may be infinite.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval whole_line() {
    return {-std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity()};
  }
  double width() const { return hi - lo; }
  bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

/// Below this distance from 1 the deformed exp/log switch to exp/log.
inline constexpr double kBetaOneCrossover = 1e-8;

/// exp_beta(u) = [1 + (1 - beta) u]_+^{1/(1 - beta)}; exp(u) at beta = 1.
inline double beta_exp(double u, double beta) {
  if (std::abs(beta - 1.0) < kBetaOneCrossover) return std::exp(u);
  const double base = 1.0 + (1.0 - beta) * u;
  if (base <= 0.0) {
    // beta > 1 has a pole instead of a truncation; outside the pole branch the
    // function is undefined, report +inf rather than a negative power.
    return beta < 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return std::exp(std::log(base) / (1.0 - beta));
}

/// log_beta(u) = (u^{1 - beta} - 1) / (1 - beta); log(u) at beta = 1.
inline double beta_log(double u, double beta) {
  detail::require(u >= 0.0, Errc::domain, "beta_log requires u >= 0",
                  "beta_log");
  if (std::abs(beta - 1.0) < kBetaOneCrossover) return std::log(u);
  if (u == 0.0) {
    return beta < 1.0 ? -1.0 / (1.0 - beta)
                      : -std::numeric_limits<double>::infinity();
  }
  return std::expm1((1.0 - beta) * std::log(u)) / (1.0 - beta);
}

/// Natural log of the Gamma function for x > 0.
inline double log_gamma(double x) {
  detail::require(x > 0.0, Errc::domain, "log_gamma requires x > 0",
                  "log_gamma");
  return std::lgamma(x);
}

/// Standard normal density.
inline double std_normal_pdf(double t) {
  if (!std::isfinite(t)) return 0.0;
  return std::exp(-0.5 * t * t) / std::sqrt(2.0 * std::numbers::pi);
}

/// N(x; mean, var) for a scalar Gaussian.
inline double normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * std::numbers::pi * var);
}

/// Phi(v) - Phi(u) for u <= v, evaluated with erfc on the far side of zero so
/// that tail masses keep full relative precision.
inline double std_normal_mass(double u, double v) {
  if (!(u < v)) return 0.0;
  const double k = 1.0 / std::numbers::sqrt2;
  if (u >= 0.0) return 0.5 * (std::erfc(u * k) - std::erfc(v * k));
  if (v <= 0.0) return 0.5 * (std::erfc(-v * k) - std::erfc(-u * k));
  return 0.5 * (std::erf(v * k) - std::erf(u * k));
}

/// Largest moment order supported by gauss_moment.
inline constexpr int kMaxGaussMoment = 12;

/// Integral over I of t^n N(t; 0, 1), from the double-factorial
/// antiderivatives
///   int t^{2k+1} phi = -phi(t) sum_{j<=k} (2k)!!/(2j)!! t^{2j}
///   int t^{2k+2} phi = -phi(t) sum_{j<=k} (2k+1)!!/(2j+1)!! t^{2j+1}
///                      + (2k+1)!! Phi(t).
inline double gauss_moment(int n, Interval range) {
  detail::require(n >= 0 && n <= kMaxGaussMoment, Errc::unsupported,
                  "gauss_moment supports 0 <= n <= 12", "gauss_moment");
  const double u = range.lo;
  const double v = range.hi;
  if (!(u < v)) return 0.0;

  // Polynomial part q(t) of the antiderivative -phi(t) q(t) + c Phi(t).
  const auto poly_part = [n](double t) {
    if (!std::isfinite(t)) return 0.0;
    double q = 0.0;
    if (n % 2 == 1) {
      // (2k)!!/(2j)!! summed from j = k down to 0.
      const int k = (n - 1) / 2;
      double coef = 1.0;
      for (int j = k; j >= 0; --j) {
        q += coef * std::pow(t, 2 * j);
        if (j > 0) coef *= 2.0 * j;
      }
    } else if (n >= 2) {
      const int k = (n - 2) / 2;
      double coef = 1.0;
      for (int j = k; j >= 0; --j) {
        q += coef * std::pow(t, 2 * j + 1);
        if (j > 0) coef *= 2.0 * j + 1.0;
      }
    }
    return std_normal_pdf(t) * q;
  };

  double cdf_coef = 0.0;
  if (n % 2 == 0) {
    cdf_coef = 1.0;
    for (int m = n - 1; m > 1; m -= 2) cdf_coef *= m;
  }
  return -(poly_part(v) - poly_part(u)) + cdf_coef * std_normal_mass(u, v);
}

}  // namespace sparsedist
