// SPDX-License-Identifier: Apache-2.0
//
// Tsallis negentropies on finite domains, escort distributions, finite
// entmax / sparsemax, the normalizing function A_alpha and the generalized
// beta-covariance.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "sparsedist/error.hpp"
#include "sparsedist/linalg.hpp"
#include "sparsedist/special.hpp"

namespace sparsedist {

/// Entropic index alpha >= 0. The deformed exponential used by the
/// regularized prediction map has index beta = 2 - alpha.
class Alpha {
 public:
  explicit Alpha(double value) : value_(value) {
    detail::require(std::isfinite(value) && value >= 0.0, Errc::domain,
                    "alpha must be finite and non-negative", "Alpha");
  }
  double value() const { return value_; }
  double beta() const { return 2.0 - value_; }
  /// alpha = 1 within the deformed-exp crossover, i.e. the Shannon case.
  bool is_shannon() const { return std::abs(value_ - 1.0) < kBetaOneCrossover; }
  bool is_sparsemax() const { return value_ == 2.0; }

 private:
  double value_;
};

/// Probability vector on a finite set.
struct FiniteDistribution {
  std::vector<double> probs;

  std::size_t size() const { return probs.size(); }
  std::size_t support_size() const {
    return static_cast<std::size_t>(
        std::count_if(probs.begin(), probs.end(), [](double p) { return p > 0; }));
  }
  bool valid(double tol = 1e-12) const {
    if (probs.empty()) return false;
    double sum = 0.0;
    for (double p : probs) {
      if (!(p >= 0.0)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }
};

namespace detail {

inline void require_distribution(const FiniteDistribution& p,
                                 const char* ctx) {
  require(p.valid(1e-9), Errc::domain,
          "probabilities must be non-negative and sum to one", ctx);
}

}  // namespace detail

/// Omega_alpha(p) = (sum p^alpha - 1) / (alpha (alpha - 1)); Shannon
/// negentropy sum p log p at alpha = 1 with 0 log 0 = 0.
inline double tsallis_negentropy_finite(const FiniteDistribution& p,
                                        Alpha alpha) {
  detail::require_distribution(p, "tsallis_negentropy_finite");
  detail::require(alpha.value() > 0.0, Errc::domain,
                  "negentropy needs alpha > 0", "tsallis_negentropy_finite");
  if (alpha.is_shannon()) {
    double s = 0.0;
    for (double q : p.probs) {
      if (q > 0.0) s += q * std::log(q);
    }
    return s;
  }
  const double a = alpha.value();
  double s = 0.0;
  for (double q : p.probs) {
    if (q > 0.0) s += std::pow(q, a);
  }
  return (s - 1.0) / (a * (a - 1.0));
}

/// beta-escort p^beta / sum p^beta. beta = 0 gives the uniform distribution
/// on the support of p.
inline FiniteDistribution escort(const FiniteDistribution& p, double beta) {
  detail::require_distribution(p, "escort");
  detail::require(beta >= 0.0, Errc::domain, "escort needs beta >= 0",
                  "escort");
  FiniteDistribution out{std::vector<double>(p.size(), 0.0)};
  double norm = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p.probs[i] > 0.0) {
      out.probs[i] = beta == 0.0 ? 1.0 : std::pow(p.probs[i], beta);
      norm += out.probs[i];
    }
  }
  for (double& q : out.probs) q /= norm;
  return out;
}

namespace detail {

inline std::vector<double> softmax(std::span<const double> f) {
  const double fmax = *std::max_element(f.begin(), f.end());
  std::vector<double> p(f.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    p[i] = std::exp(f[i] - fmax);
    sum += p[i];
  }
  for (double& q : p) q /= sum;
  return p;
}

/// Threshold tau of the Euclidean projection of f onto {p >= 0, sum p = mass}.
inline double sparsemax_threshold(std::span<const double> f, double mass = 1.0) {
  std::vector<double> z(f.begin(), f.end());
  std::stable_sort(z.begin(), z.end(), std::greater<>());
  double cumsum = 0.0;
  double tau = z[0] - mass;
  for (std::size_t k = 0; k < z.size(); ++k) {
    cumsum += z[k];
    const double candidate = (cumsum - mass) / static_cast<double>(k + 1);
    if (z[k] > candidate) {
      tau = candidate;
    } else {
      break;
    }
  }
  return tau;
}

}  // namespace detail

/// Threshold tau such that p_i = [(alpha - 1)(f_i - tau)]_+^{1/(alpha - 1)}
/// sums to one, for alpha in (1, 2]. At alpha = 2 this is the exact
/// sort-based sparsemax threshold.
inline double entmax_threshold(std::span<const double> f, Alpha alpha) {
  constexpr const char* kCtx = "entmax_threshold";
  detail::require(!f.empty(), Errc::domain, "empty score vector", kCtx);
  const double a = alpha.value();
  detail::require(a > 1.0 && a <= 2.0 && !alpha.is_shannon(),
                  Errc::unsupported, "threshold needs alpha in (1, 2]", kCtx);
  if (a == 2.0) return detail::sparsemax_threshold(f);
  const double fmax = *std::max_element(f.begin(), f.end());
  const double k = static_cast<double>(f.size());
  const double inv = 1.0 / (a - 1.0);
  const auto mass = [&](double tau) {
    double s = 0.0;
    for (double fi : f) {
      const double u = (a - 1.0) * (fi - tau);
      if (u > 0.0) s += std::pow(u, inv);
    }
    return s;
  };
  double lo = fmax - std::pow(k, a - 1.0) * inv;  // mass(lo) >= 1
  double hi = fmax;                                // mass(hi) = 0
  for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(fmax));
       ++it) {
    const double mid = 0.5 * (lo + hi);
    (mass(mid) >= 1.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Finite alpha-entmax: argmax_p p^T f - Omega_alpha(p) over the simplex,
/// for alpha in [1, 2]. alpha = 1 is softmax, alpha = 2 is sparsemax.
inline FiniteDistribution entmax_finite(std::span<const double> f, Alpha alpha) {
  constexpr const char* kCtx = "entmax_finite";
  detail::require(!f.empty(), Errc::domain, "empty score vector", kCtx);
  for (double fi : f) {
    detail::require(std::isfinite(fi), Errc::domain, "non-finite score", kCtx);
  }
  const double a = alpha.value();
  detail::require(a >= 1.0 && a <= 2.0, Errc::unsupported,
                  "entmax_finite supports alpha in [1, 2]", kCtx);
  if (alpha.is_shannon()) return {detail::softmax(f)};

  const double tau = entmax_threshold(f, alpha);
  std::vector<double> p(f.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double u = (a - 1.0) * (f[i] - tau);
    if (u > 0.0) p[i] = (a == 2.0) ? u : std::pow(u, 1.0 / (a - 1.0));
    sum += p[i];
  }
  if (a != 2.0) {
    for (double& q : p) q /= sum;
  }
  return {std::move(p)};
}

/// One quadrature node of a density: weight (measure), density value p(t)
/// and score f(t).
struct WeightedSample {
  double weight;
  double density;
  double score;
};

/// A_alpha(f) = (1/(1-alpha) + int p^{2-alpha} f) / int p^{2-alpha}
///              - 1/(1-alpha), integrals taken over supp(p).
/// The threshold of the density is tau = A_alpha(f) - 1/(alpha - 1).
inline double normalizer_A_alpha(std::span<const WeightedSample> samples,
                                 Alpha alpha) {
  constexpr const char* kCtx = "normalizer_A_alpha";
  detail::require(!alpha.is_shannon(), Errc::domain,
                  "A_alpha formula needs alpha != 1", kCtx);
  const double beta = alpha.beta();
  const double c = 1.0 / (1.0 - alpha.value());
  double mass = 0.0;
  double weighted_score = 0.0;
  for (const auto& s : samples) {
    if (s.density <= 0.0) continue;
    const double w = s.weight * (beta == 0.0 ? 1.0 : std::pow(s.density, beta));
    mass += w;
    weighted_score += w * s.score;
  }
  detail::require(mass > 0.0, Errc::domain, "zero escort mass", kCtx);
  return (c + weighted_score) / mass - c;
}

/// cov_{p,beta}[phi, psi] = ||p||_beta^beta (E_esc[phi psi^T]
///                            - E_esc[phi] E_esc[psi]^T)
/// from quadrature nodes. Row i of phi / psi holds the statistics at node i.
/// Only nodes with density > 0 contribute (beta = 0 is the uniform measure on
/// the support).
inline Matrix generalized_covariance(std::span<const double> weights,
                                     std::span<const double> density,
                                     double beta, const Matrix& phi,
                                     const Matrix& psi) {
  constexpr const char* kCtx = "generalized_covariance";
  const auto n = static_cast<Eigen::Index>(weights.size());
  detail::require(static_cast<Eigen::Index>(density.size()) == n &&
                      phi.rows() == n && psi.rows() == n,
                  Errc::shape_mismatch, "inconsistent node counts", kCtx);
  detail::require(beta >= 0.0, Errc::domain, "beta must be >= 0", kCtx);
  double norm = 0.0;
  Vector e_phi = Vector::Zero(phi.cols());
  Vector e_psi = Vector::Zero(psi.cols());
  Matrix e_cross = Matrix::Zero(phi.cols(), psi.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (density[i] <= 0.0) continue;
    const double w =
        weights[i] * (beta == 0.0 ? 1.0 : std::pow(density[i], beta));
    norm += w;
    e_phi += w * phi.row(i).transpose();
    e_psi += w * psi.row(i).transpose();
    e_cross += w * phi.row(i).transpose() * psi.row(i);
  }
  if (norm <= 0.0) return Matrix::Zero(phi.cols(), psi.cols());
  return e_cross - e_phi * e_psi.transpose() / norm;
}

}  // namespace sparsedist
