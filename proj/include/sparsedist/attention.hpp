// SPDX-License-Identifier: Apache-2.0
//
// Continuous attention with Gaussian RBF value functions. The attention
// density is the alpha-entmax of a quadratic score f(t) = theta^T phi(t),
// phi(t) = [t, vec(t t^T)], and the context is c = B r with
// r_j = E_p[psi_j(t)], psi_j = N(t; mu_j, Sigma_j).
//
// 1-d, alpha = (n+1)/n: the density is a polynomial of degree 2n on its
// support, so r_j and the Jacobian rows are sums of truncated Gaussian
// moments. 2-d, alpha = 2: per-angle radial integrals are closed form, the
// angle is integrated by the periodic trapezoid rule.
#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "sparsedist/densities.hpp"
#include "sparsedist/error.hpp"
#include "sparsedist/linalg.hpp"
#include "sparsedist/losses.hpp"
#include "sparsedist/special.hpp"
#include "sparsedist/tsallis.hpp"

namespace sparsedist {

inline constexpr int kMaxBasisComponents = 4096;
inline constexpr int kDefaultAngleNodes = 256;

struct BasisComponent {
  Vector mu;
  SpdMatrix sigma;
};

/// Gaussian RBF components plus the value coefficients B (D x Nbasis) once
/// fitted.
struct AttentionBasis {
  std::vector<BasisComponent> components;
  std::optional<Matrix> values;

  int size() const { return static_cast<int>(components.size()); }

  /// Evaluations psi_j(t) for every component.
  Vector evaluate(std::span<const double> t) const {
    Vector out(size());
    for (int j = 0; j < size(); ++j) {
      const auto& c = components[j];
      const Vector d = Eigen::Map<const Vector>(t.data(), c.mu.size()) - c.mu;
      const int n = static_cast<int>(c.mu.size());
      out(j) = std::exp(-0.5 * c.sigma.inv_quad(d) -
                        0.5 * n * std::log(2.0 * std::numbers::pi) -
                        0.5 * c.sigma.log_det());
    }
    return out;
  }
};

/// Quadratic score f(t) = -(t - mu)^T Sigma^{-1} (t - mu) / 2 (up to a
/// constant) and the entmax exponent it is paired with.
struct QuadraticScore {
  Vector mu;
  SpdMatrix sigma;
  Alpha alpha;

  int dim() const { return static_cast<int>(mu.size()); }
  Vector canonical() const { return to_canonical(mu, sigma); }
  static QuadraticScore from_canonical(const Vector& theta, Alpha alpha) {
    auto [mu, sigma] = sparsedist::from_canonical(theta);
    return {std::move(mu), std::move(sigma), alpha};
  }
};

/// Forward output r and, on request, the Jacobian dr/dtheta (Nbasis rows).
struct AttentionResult {
  Vector r;
  std::optional<Matrix> jacobian;
};

namespace detail {

using Poly = std::vector<double>;  // ascending coefficients

inline Poly poly_mul(const Poly& a, const Poly& b) {
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline Poly poly_pow(const Poly& a, int k) {
  Poly out{1.0};
  for (int i = 0; i < k; ++i) out = poly_mul(out, a);
  return out;
}

/// int_z q(z) phi(z) dz over the range.
inline double gauss_poly_integral(const Poly& q, Interval z) {
  double s = 0.0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (q[k] != 0.0) s += q[k] * gauss_moment(static_cast<int>(k), z);
  }
  return s;
}

/// int_lo^hi q(x) dx.
inline double poly_integral(const Poly& q, double lo, double hi) {
  double s = 0.0;
  double plo = lo, phi = hi;
  for (std::size_t k = 0; k < q.size(); ++k) {
    s += q[k] * (phi - plo) / static_cast<double>(k + 1);
    plo *= lo;
    phi *= hi;
  }
  return s;
}

/// n with alpha = (n+1)/n, for the four supported 1-d values.
inline int entmax_degree(Alpha alpha, const char* ctx) {
  if (alpha.is_shannon()) return 0;
  const double n = 1.0 / (alpha.value() - 1.0);
  const double r = std::round(n);
  require(r >= 1.0 && r <= 3.0 && std::abs(n - r) < 1e-9, Errc::unsupported,
          "1-d attention supports alpha in {1, 4/3, 3/2, 2}", ctx);
  return static_cast<int>(r);
}

inline void require_basis(const QuadraticScore& s, const AttentionBasis& b,
                          const char* ctx) {
  require(b.size() >= 1, Errc::domain, "basis needs at least one component",
          ctx);
  require(b.size() <= kMaxBasisComponents, Errc::unsupported,
          "basis component count exceeds 4096", ctx);
  for (const auto& c : b.components) {
    require(c.mu.size() == s.mu.size() && c.sigma.dim() == s.dim(),
            Errc::shape_mismatch, "basis component dimension differs", ctx);
  }
}

/// Softmax attention in any dimension: product of Gaussians.
inline AttentionResult gaussian_attention(const QuadraticScore& s,
                                          const AttentionBasis& basis,
                                          bool with_jacobian) {
  const int n = s.dim();
  const int m = n + n * n;
  AttentionResult out{Vector(basis.size()), std::nullopt};
  Matrix jac(basis.size(), m);
  const Matrix& prec = s.sigma.inverse();
  const Matrix second = s.sigma.matrix() + s.mu * s.mu.transpose();
  for (int j = 0; j < basis.size(); ++j) {
    const auto& c = basis.components[j];
    const SpdMatrix sum = spd_decompose(s.sigma.matrix() + c.sigma.matrix());
    const Vector delta = s.mu - c.mu;
    const double rj =
        std::exp(-0.5 * sum.inv_quad(delta) -
                 0.5 * n * std::log(2.0 * std::numbers::pi) -
                 0.5 * sum.log_det());
    out.r(j) = rj;
    if (!with_jacobian) continue;
    const Matrix prod_cov =
        spd_decompose(prec + c.sigma.inverse()).inverse();
    const Vector prod_mu =
        prod_cov * (prec * s.mu + c.sigma.inverse() * c.mu);
    jac.row(j).head(n) = rj * (prod_mu - s.mu).transpose();
    const Matrix block =
        rj * (prod_cov + prod_mu * prod_mu.transpose() - second);
    jac.row(j).tail(n * n) =
        Eigen::Map<const Vector>(block.data(), n * n).transpose();
  }
  if (with_jacobian) out.jacobian = std::move(jac);
  return out;
}

/// 1-d entmax attention, alpha = (n+1)/n with n in {1, 2, 3}.
inline AttentionResult polynomial_attention_1d(const QuadraticScore& s,
                                               const AttentionBasis& basis,
                                               int degree,
                                               bool with_jacobian) {
  const auto p = make_beta_gaussian(s.alpha, s.mu, s.sigma);
  const double k = s.alpha.value() - 1.0;
  const double mu = s.mu(0);
  const double var = s.sigma.matrix()(0, 0);
  const double half = std::sqrt(-2.0 * p.tau * var);

  // Escort weight p^{2-alpha} = g^{n-1} against Lebesgue measure (in d).
  const Poly gd{-k * p.tau, 0.0, -0.5 * k / var};
  const Poly wd = poly_pow(gd, degree - 1);
  const double w0 = poly_integral(wd, -half, half);
  const double w1 = poly_integral(poly_mul(wd, {mu, 1.0}), -half, half);
  const double w2 =
      poly_integral(poly_mul(wd, {mu * mu, 2.0 * mu, 1.0}), -half, half);

  AttentionResult out{Vector::Zero(basis.size()), std::nullopt};
  Matrix jac = Matrix::Zero(basis.size(), 2);
  for (int j = 0; j < basis.size(); ++j) {
    const auto& c = basis.components[j];
    const double mj = c.mu(0);
    const double sj = std::sqrt(c.sigma.matrix()(0, 0));
    // psi_j's 8-sigma interval misses the support: exactly zero.
    if (mj + 8.0 * sj <= mu - half || mj - 8.0 * sj >= mu + half) continue;
    // In z = (t - mu_j) / s_j: d = t - mu = delta + s_j z.
    const double delta = mj - mu;
    const Poly g{k * (-p.tau) - 0.5 * k * delta * delta / var,
                 -k * delta * sj / var, -0.5 * k * sj * sj / var};
    const Interval z{(-half - delta) / sj, (half - delta) / sj};
    out.r(j) = gauss_poly_integral(poly_pow(g, degree), z);
    if (!with_jacobian) continue;
    const Poly w = poly_pow(g, degree - 1);
    const Poly t{mj, sj};
    const double g0 = gauss_poly_integral(w, z);
    const double g1 = gauss_poly_integral(poly_mul(w, t), z);
    const double g2 = gauss_poly_integral(poly_mul(w, poly_mul(t, t)), z);
    jac(j, 0) = g1 - w1 * g0 / w0;
    jac(j, 1) = g2 - w2 * g0 / w0;
  }
  if (with_jacobian) out.jacobian = std::move(jac);
  return out;
}

/// 2-d sparsemax attention. t = mu + rho L u(th) with L = (-2 tau Sigma)^{1/2}
/// maps the unit disk onto the support, where p = -tau (1 - rho^2).
inline AttentionResult sparsemax_attention_2d(const QuadraticScore& s,
                                              const AttentionBasis& basis,
                                              int angle_nodes,
                                              bool with_jacobian) {
  constexpr const char* kCtx = "attention_2d";
  require(angle_nodes >= 8, Errc::domain, "need at least 8 angle nodes", kCtx);
  const auto p = make_beta_gaussian(s.alpha, s.mu, s.sigma);
  const Vector& w = p.sigma_tilde.eigenvalues();
  require(w.minCoeff() >= 1e-10 * w.maxCoeff(), Errc::not_spd,
          "sigma_tilde is near-singular", kCtx);
  const double neg_tau = -p.tau;
  const Matrix lmap = std::sqrt(2.0 * neg_tau) * s.sigma.sqrt();
  const double det_l = 2.0 * neg_tau * std::sqrt(s.sigma.det());
  const Vector& mu = s.mu;
  const Matrix uniform_second =
      mu * mu.transpose() + 0.5 * neg_tau * s.sigma.matrix();
  const Vector box = (2.0 * neg_tau * s.sigma.matrix().diagonal()).cwiseSqrt();

  AttentionResult out{Vector::Zero(basis.size()), std::nullopt};
  Matrix jac = Matrix::Zero(basis.size(), 6);
  const double dth = 2.0 * std::numbers::pi / angle_nodes;
  for (int j = 0; j < basis.size(); ++j) {
    const auto& c = basis.components[j];
    const Vector reach = 8.0 * c.sigma.matrix().diagonal().cwiseSqrt();
    if (((c.mu - mu).cwiseAbs() - reach - box).maxCoeff() >= 0.0) continue;
    const Matrix& cprec = c.sigma.inverse();
    const Vector delta = c.mu - mu;
    const double cq = delta.dot(cprec * delta);
    const double norm = 1.0 / (2.0 * std::numbers::pi * std::sqrt(c.sigma.det()));
    double r = 0.0, g0 = 0.0;
    Vector g1 = Vector::Zero(2);
    Matrix g2 = Matrix::Zero(2, 2);
    for (int k = 0; k < angle_nodes; ++k) {
      const double th = k * dth;
      const Vector v = lmap * Vector{{std::cos(th), std::sin(th)}};
      const Vector pv = cprec * v;
      const double a = v.dot(pv);
      const double b = delta.dot(pv);
      const double r0 = b / a;
      const double sd = 1.0 / std::sqrt(a);
      // psi_j along the ray, as a Gaussian in rho, then in z.
      const double scale = norm * std::exp(-0.5 * (cq - b * b / a)) *
                           std::sqrt(2.0 * std::numbers::pi) * sd;
      if (scale == 0.0) continue;
      const Interval z{-r0 / sd, (1.0 - r0) / sd};
      const Poly rho{r0, sd};
      const Poly rho2 = poly_mul(rho, rho);
      const Poly one_minus{1.0 - rho2[0], -rho2[1], -rho2[2]};
      r += scale * neg_tau * gauss_poly_integral(poly_mul(rho, one_minus), z);
      if (!with_jacobian) continue;
      const double m1 = gauss_poly_integral(rho, z);
      const double m2 = gauss_poly_integral(rho2, z);
      const double m3 = gauss_poly_integral(poly_mul(rho2, rho), z);
      // rho t and rho t t^T with t = mu + rho v
      g0 += scale * m1;
      g1 += scale * (m1 * mu + m2 * v);
      g2 += scale * (m1 * mu * mu.transpose() +
                     m2 * (mu * v.transpose() + v * mu.transpose()) +
                     m3 * v * v.transpose());
    }
    const double f = det_l * dth;
    out.r(j) = f * r;
    if (!with_jacobian) continue;
    g0 *= f;
    g1 *= f;
    g2 *= f;
    jac.row(j).head(2) = (g1 - mu * g0).transpose();
    const Matrix block = g2 - uniform_second * g0;
    jac.row(j).tail(4) = Eigen::Map<const Vector>(block.data(), 4).transpose();
  }
  if (with_jacobian) out.jacobian = std::move(jac);
  return out;
}

inline AttentionResult attention(const QuadraticScore& s,
                                 const AttentionBasis& basis, int angle_nodes,
                                 bool with_jacobian) {
  constexpr const char* kCtx = "attention";
  require_basis(s, basis, kCtx);
  if (s.alpha.is_shannon()) {
    require(s.dim() <= kMaxSpdDim, Errc::unsupported,
            "softmax attention supports N <= 8", kCtx);
    return gaussian_attention(s, basis, with_jacobian);
  }
  if (s.dim() == 1) {
    return polynomial_attention_1d(s, basis, entmax_degree(s.alpha, kCtx),
                                   with_jacobian);
  }
  require(s.dim() == 2 && s.alpha.is_sparsemax(), Errc::unsupported,
          "attention beyond 1-d needs alpha = 1, or alpha = 2 with N = 2",
          kCtx);
  return sparsemax_attention_2d(s, basis, angle_nodes, with_jacobian);
}

}  // namespace detail

/// r_j = E_p[psi_j] for a 1-d score, alpha in {1, 4/3, 3/2, 2}.
inline Vector attention_forward_1d(const QuadraticScore& s,
                                   const AttentionBasis& basis) {
  detail::require(s.dim() == 1, Errc::shape_mismatch, "score must be 1-d",
                  "attention_forward_1d");
  return detail::attention(s, basis, kDefaultAngleNodes, false).r;
}

/// dr/dtheta, one row cov_{p,2-alpha}(phi, psi_j) per component.
inline Matrix attention_backward_1d(const QuadraticScore& s,
                                    const AttentionBasis& basis) {
  detail::require(s.dim() == 1, Errc::shape_mismatch, "score must be 1-d",
                  "attention_backward_1d");
  return *detail::attention(s, basis, kDefaultAngleNodes, true).jacobian;
}

/// 2-d forward, alpha in {1, 2}.
inline Vector attention_forward_2d(const QuadraticScore& s,
                                   const AttentionBasis& basis,
                                   int angle_nodes = kDefaultAngleNodes) {
  detail::require(s.dim() == 2, Errc::shape_mismatch, "score must be 2-d",
                  "attention_forward_2d");
  return detail::attention(s, basis, angle_nodes, false).r;
}

inline Matrix attention_backward_2d(const QuadraticScore& s,
                                    const AttentionBasis& basis,
                                    int angle_nodes = kDefaultAngleNodes) {
  detail::require(s.dim() == 2, Errc::shape_mismatch, "score must be 2-d",
                  "attention_backward_2d");
  return *detail::attention(s, basis, angle_nodes, true).jacobian;
}

/// Dimension-dispatching forward and Jacobian in one pass.
inline AttentionResult attention(const QuadraticScore& s,
                                 const AttentionBasis& basis,
                                 bool with_jacobian = true) {
  return detail::attention(s, basis, kDefaultAngleNodes, with_jacobian);
}

/// Ridge fit of the value function: B = H F^T (F F^T + lambda I)^{-1} with
/// F_{jl} = psi_j(t_l). locations holds one point per row.
inline Matrix fit_value_function(const Matrix& h, const Matrix& locations,
                                 const AttentionBasis& basis, double lambda) {
  constexpr const char* kCtx = "fit_value_function";
  detail::require(lambda > 0.0, Errc::domain, "lambda must be positive", kCtx);
  detail::require(basis.size() >= 1 && basis.size() <= kMaxBasisComponents,
                  Errc::unsupported, "basis size must be in [1, 4096]", kCtx);
  detail::require(locations.rows() >= 1 && h.cols() == locations.rows(),
                  Errc::shape_mismatch, "H needs one column per location",
                  kCtx);
  Matrix f(basis.size(), locations.rows());
  for (Eigen::Index l = 0; l < locations.rows(); ++l) {
    const Vector t = locations.row(l).transpose();
    f.col(l) = basis.evaluate(std::span<const double>(t.data(), t.size()));
  }
  Matrix gram = f * f.transpose();
  gram.diagonal().array() += lambda;
  Eigen::LLT<Matrix> llt(gram);
  detail::require(llt.info() == Eigen::Success, Errc::not_spd,
                  "ridge system is not positive definite", kCtx);
  // B^T = (F F^T + lambda I)^{-1} F H^T
  return llt.solve(f * h.transpose()).transpose();
}

/// Context vector c = B r.
inline Vector context(const Matrix& b, const Vector& r) {
  detail::require(b.cols() == r.size(), Errc::shape_mismatch,
                  "B columns must match r", "context");
  return b * r;
}

struct DiscreteAttention {
  Vector probs;
  Matrix jacobian;
};

/// softmax (alpha = 1) or sparsemax (alpha = 2) and its Jacobian.
inline DiscreteAttention discrete_attention(std::span<const double> f,
                                            Alpha alpha) {
  detail::require(alpha.is_shannon() || alpha.is_sparsemax(),
                  Errc::unsupported, "discrete attention needs alpha in {1, 2}",
                  "discrete_attention");
  const auto dist = entmax_finite(f, alpha);
  const Vector p = Eigen::Map<const Vector>(dist.probs.data(),
                                            static_cast<Eigen::Index>(dist.probs.size()));
  DiscreteAttention out{p, Matrix()};
  if (alpha.is_shannon()) {
    out.jacobian = Matrix(p.asDiagonal()) - p * p.transpose();
    return out;
  }
  const Vector s = (p.array() > 0.0).cast<double>().matrix();
  out.jacobian = Matrix(s.asDiagonal()) - s * s.transpose() / s.sum();
  return out;
}

}  // namespace sparsedist
