// SPDX-License-Identifier: Apache-2.0
//
// Exact samplers: unit sphere, Gamma/Beta and beta-Gaussians through the
// elliptical representation t = mu + r sigma_tilde^{1/2} u with
// r^2 / R^2 ~ Beta(N/2, alpha/(alpha-1)).
//
// The variate transforms are written out instead of using <random>
// distributions, whose algorithms differ between standard libraries; only
// the mt19937_64 engine (fully specified) is taken from the standard.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <random>

#include "sparsedist/densities.hpp"
#include "sparsedist/error.hpp"
#include "sparsedist/linalg.hpp"

namespace sparsedist {

/// Seeded generator. Every sampler takes one explicitly.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Independent stream for worker k (splitmix64 of seed ^ k).
  RngState derive(std::uint64_t k) const {
    std::uint64_t z = (seed_ ^ k) + 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return RngState(z ^ (z >> 31));
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() {
    while (true) {
      const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
      if (u > 0.0) return u;
    }
  }

  /// Standard normal (Marsaglia polar method, one value cached).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = 2.0 * uniform() - 1.0;
      y = 2.0 * uniform() - 1.0;
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * m;
    has_spare_ = true;
    return x * m;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Gamma(shape, 1) by Marsaglia-Tsang; shape < 1 via the U^{1/shape} boost.
inline double sample_gamma(double shape, RngState& rng) {
  detail::require(shape > 0.0 && std::isfinite(shape), Errc::domain,
                  "gamma shape must be positive", "sample_gamma");
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

/// Beta(a, b) as X / (X + Y) with independent Gamma draws.
inline double sample_beta(double a, double b, RngState& rng) {
  detail::require(a > 0.0 && b > 0.0, Errc::domain,
                  "beta parameters must be positive", "sample_beta");
  while (true) {
    const double x = sample_gamma(a, rng);
    const double y = sample_gamma(b, rng);
    const double s = x + y;
    if (s > 0.0 && y > 0.0) return x / s;
  }
}

/// Uniform direction on the unit sphere in R^N.
inline Vector sample_unit_sphere(int n, RngState& rng) {
  detail::require(n >= 1, Errc::domain, "sphere dimension must be >= 1",
                  "sample_unit_sphere");
  Vector u(n);
  double norm = 0.0;
  do {
    for (int i = 0; i < n; ++i) u(i) = rng.normal();
    norm = u.norm();
  } while (norm == 0.0);
  return u / norm;
}

/// n i.i.d. draws, one per row. alpha = 1 falls back to mu + Sigma^{1/2} z.
inline Matrix sample_beta_gaussian(const BetaGaussianParams& p, int n,
                                   RngState& rng) {
  detail::require(n >= 0, Errc::domain, "sample count must be >= 0",
                  "sample_beta_gaussian");
  const int dim = p.dim();
  Matrix out(n, dim);
  if (p.is_gaussian()) {
    const Matrix& root = p.sigma.sqrt();
    Vector z(dim);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < dim; ++k) z(k) = rng.normal();
      out.row(i) = (p.mu + root * z).transpose();
    }
    return out;
  }
  const double a = p.alpha.value();
  const double shape_a = 0.5 * dim;
  const double shape_b = a / (a - 1.0);
  const Matrix& root = p.sigma_tilde.sqrt();
  for (int i = 0; i < n; ++i) {
    const double r = p.radius * std::sqrt(sample_beta(shape_a, shape_b, rng));
    const Vector u = sample_unit_sphere(dim, rng);
    out.row(i) = (p.mu + r * (root * u)).transpose();
  }
  return out;
}

/// Headered CSV, columns t_1..t_N, 17 significant digits.
inline void write_samples_csv(std::ostream& os, const Matrix& samples) {
  for (Eigen::Index k = 0; k < samples.cols(); ++k) {
    os << (k ? "," : "") << "t_" << (k + 1);
  }
  os << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (Eigen::Index k = 0; k < samples.cols(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g", samples(i, k));
      os << (k ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace sparsedist
