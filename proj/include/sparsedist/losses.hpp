// SPDX-License-Identifier: Apache-2.0
//
// Fenchel-Young and cross-Omega losses for quadratic scores, canonical
// gradients and Hessians, moment matching, and a heteroscedastic regression
// fitter built on the 1-d Dirac cross-Omega loss.
#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "sparsedist/densities.hpp"
#include "sparsedist/error.hpp"
#include "sparsedist/linalg.hpp"
#include "sparsedist/sampling.hpp"
#include "sparsedist/tsallis.hpp"

namespace sparsedist {

// ---------------------------------------------------------------------------
// Canonical parametrization of quadratic scores
// ---------------------------------------------------------------------------

/// theta = [Sigma^{-1} mu, vec(-Sigma^{-1} / 2)] for the statistics
/// phi(t) = [t, vec(t t^T)]; vec is column-major. Length N + N^2.
inline Vector to_canonical(const Vector& mu, const SpdMatrix& sigma) {
  const int n = sigma.dim();
  Vector theta(n + n * n);
  theta.head(n) = sigma.inverse() * mu;
  const Matrix q = -0.5 * sigma.inverse();
  theta.tail(n * n) = Eigen::Map<const Vector>(q.data(), n * n);
  return theta;
}

/// Dimension N with N + N^2 = size, or throws.
inline int canonical_dim(Eigen::Index size) {
  for (int n = 1; n <= kMaxSpdDim; ++n) {
    if (n + n * n == size) return n;
  }
  throw Error(Errc::shape_mismatch, "canonical vector length is not N + N^2",
              "canonical_dim");
}

/// Inverse of to_canonical. The matrix block is symmetrized first; throws
/// Errc::domain when it is not negative definite.
inline std::pair<Vector, SpdMatrix> from_canonical(const Vector& theta) {
  const int n = canonical_dim(theta.size());
  Matrix q = Eigen::Map<const Matrix>(theta.tail(n * n).data(), n, n);
  q = (0.5 * (q + q.transpose())).eval();
  SpdMatrix prec;
  try {
    prec = spd_decompose(-2.0 * q);
  } catch (const Error&) {
    throw Error(Errc::domain,
                "matrix block of theta must be negative definite",
                "from_canonical");
  }
  SpdMatrix sigma = spd_decompose(prec.inverse());
  Vector mu = sigma.matrix() * theta.head(n);
  return {std::move(mu), std::move(sigma)};
}

/// Statistics v = E[phi(t)] = [mean, vec(second moment)].
struct Statistics {
  Vector v;

  int dim() const { return canonical_dim(v.size()); }
  Vector mean() const { return v.head(dim()); }
  Matrix second_moment() const {
    const int n = dim();
    return Eigen::Map<const Matrix>(v.tail(n * n).data(), n, n);
  }
  Matrix covariance() const {
    const Vector m = mean();
    return second_moment() - m * m.transpose();
  }

  static Statistics from_moments(const Vector& mean, const Matrix& cov) {
    const int n = static_cast<int>(mean.size());
    Statistics s;
    s.v.resize(n + n * n);
    s.v.head(n) = mean;
    const Matrix m2 = cov + mean * mean.transpose();
    s.v.tail(n * n) = Eigen::Map<const Vector>(m2.data(), n * n);
    return s;
  }
  /// Sample statistics with the 1/n normalization.
  static Statistics from_samples(const Matrix& samples) {
    const auto rows = static_cast<double>(samples.rows());
    const Vector mean = samples.colwise().mean().transpose();
    const Matrix centered = samples.rowwise() - mean.transpose();
    return from_moments(mean, centered.transpose() * centered / rows);
  }
};

/// Expected statistics mu(theta) of a beta-Gaussian.
inline Statistics expected_statistics(const BetaGaussianParams& p) {
  const auto [mean, var] = mean_variance(p);
  return Statistics::from_moments(mean, var);
}

// ---------------------------------------------------------------------------
// Closed-form losses
// ---------------------------------------------------------------------------

/// Omega*(f) for the centered score f(t) = -(t-mu)^T Sigma^{-1} (t-mu)/2:
/// E_p[f] - Omega(p) at the regularized prediction p = N_beta(mu, Sigma).
inline double conjugate_quadratic(const BetaGaussianParams& p) {
  const Matrix var = mean_variance(p).second;
  const double ef = -0.5 * (p.sigma.inverse() * var).trace();
  return ef - beta_gaussian_negentropy(p);
}

/// L(f; p) for f = -(t - mu_f)^T Sigma_f^{-1} (t - mu_f) / 2 and
/// p = N_beta(mu, Sigma). alpha = 1 gives KL(p || N(mu_f, Sigma_f)).
inline double fy_loss_beta_gaussian(const Vector& mu_f, const SpdMatrix& sigma_f,
                                    const BetaGaussianParams& p) {
  constexpr const char* kCtx = "fy_loss_beta_gaussian";
  const int n = p.dim();
  detail::require(mu_f.size() == n && sigma_f.dim() == n, Errc::shape_mismatch,
                  "score and density dimensions differ", kCtx);
  const Vector d = p.mu - mu_f;
  const double quad = 0.5 * sigma_f.inv_quad(d);
  const double trace = (sigma_f.inverse() * p.sigma.matrix()).trace();
  if (p.is_gaussian()) {
    return quad + 0.5 * (trace - n + sigma_f.log_det() - p.sigma.log_det());
  }
  const double a = p.alpha.value();
  const double e = beta_gaussian_det_exponent(n, p.alpha);
  const double coef = p.radius * p.radius / (2.0 * a + n * (a - 1.0));
  // |Sigma|^{-e} and |Sigma_f|^{-e} through log-determinants
  const double ds = std::exp(-e * p.sigma.log_det());
  const double df = std::exp(-e * sigma_f.log_det());
  return quad + coef * (ds * (1.0 + 0.5 * (a - 1.0) * trace) -
                        df * (1.0 + 0.5 * n * (a - 1.0)));
}

/// Cross-Omega loss Omega*(f) - f(y) of a 1-d quadratic score
/// f(t) = -(t - mu_f)^2 / (2 s) against the point target y, s = sigma_f^2:
///   (y - mu_f)^2 / (2 s) + 1/(alpha(alpha-1))
///     - R^2 s^{-(alpha-1)/(alpha+1)} (alpha+1) / (2(3 alpha - 1)).
/// Finite for every y, including points outside the model support.
/// alpha = 1 is rejected; use gaussian_nll.
inline double cross_omega_loss(double mu_f, double s, double y, Alpha alpha) {
  constexpr const char* kCtx = "cross_omega_loss";
  detail::require(s > 0.0 && std::isfinite(s), Errc::domain,
                  "sigma_f^2 must be positive", kCtx);
  detail::require(alpha.value() > 1.0 && !alpha.is_shannon() &&
                      alpha.value() <= 2.0,
                  Errc::domain,
                  "cross-Omega loss needs alpha in (1, 2]; use the Gaussian "
                  "negative log-likelihood at alpha = 1",
                  kCtx);
  const double a = alpha.value();
  const double r = beta_gaussian_radius(1, alpha);
  const double d = y - mu_f;
  return 0.5 * d * d / s + 1.0 / (a * (a - 1.0)) -
         r * r * std::pow(s, -(a - 1.0) / (a + 1.0)) * (a + 1.0) /
             (2.0 * (3.0 * a - 1.0));
}

/// Gaussian negative log-likelihood without the log(2 pi)/2 constant.
inline double gaussian_nll(double mu_f, double s, double y) {
  detail::require(s > 0.0, Errc::domain, "variance must be positive",
                  "gaussian_nll");
  const double d = y - mu_f;
  return 0.5 * d * d / s + 0.5 * std::log(s);
}

/// Per-point regression loss: cross-Omega for alpha > 1, Gaussian NLL at 1.
inline double point_loss(double mu_f, double s, double y, Alpha alpha) {
  return alpha.is_shannon() ? gaussian_nll(mu_f, s, y)
                            : cross_omega_loss(mu_f, s, y, alpha);
}

/// (d/dmu_f, d/ds) of point_loss.
inline std::pair<double, double> point_loss_gradient(double mu_f, double s,
                                                     double y, Alpha alpha) {
  const double d = y - mu_f;
  const double d_mu = -d / s;
  double d_s = -0.5 * d * d / (s * s);
  if (alpha.is_shannon()) {
    d_s += 0.5 / s;
  } else {
    const double a = alpha.value();
    const double r = beta_gaussian_radius(1, alpha);
    d_s += r * r * (a - 1.0) / (2.0 * (3.0 * a - 1.0)) *
           std::pow(s, -2.0 * a / (a + 1.0));
  }
  return {d_mu, d_s};
}

// ---------------------------------------------------------------------------
// Canonical gradient and Hessian
// ---------------------------------------------------------------------------

struct FyEvaluation {
  double loss = 0.0;
  Vector gradient;
  std::optional<Matrix> hessian;
};

/// Moment matching: mean and 1/n covariance to beta-Gaussian parameters.
/// Var = c |Sigma|^{-e} Sigma gives |Sigma| = (|V| / c^N)^{1/(1 - N e)} in
/// closed form; Sigma = V |Sigma|^e / c.
inline BetaGaussianParams moment_match(const Vector& mean, const Matrix& cov,
                                       Alpha alpha) {
  constexpr const char* kCtx = "moment_match";
  SpdMatrix v;
  try {
    v = spd_decompose(0.5 * (cov + cov.transpose()));
  } catch (const Error&) {
    throw Error(Errc::domain, "degenerate sample covariance", kCtx);
  }
  if (alpha.is_shannon()) return make_beta_gaussian(Alpha(1.0), mean, v);
  const int n = v.dim();
  const double a = alpha.value();
  const double r = beta_gaussian_radius(n, alpha);
  const double c = r * r / (n + 2.0 * a / (a - 1.0));
  const double e = beta_gaussian_det_exponent(n, alpha);
  const double log_det_sigma = (v.log_det() - n * std::log(c)) / (1.0 - n * e);
  const double scale = std::exp(e * log_det_sigma) / c;
  return make_beta_gaussian(alpha, mean, v.scaled(scale));
}

/// Fits a beta-Gaussian to samples (one per row) by moment matching.
inline BetaGaussianParams fit_moment_matching(const Matrix& samples,
                                              Alpha alpha) {
  detail::require(samples.rows() >= samples.cols() + 2, Errc::domain,
                  "moment matching needs at least N + 2 samples",
                  "fit_moment_matching");
  const auto s = Statistics::from_samples(samples);
  return moment_match(s.mean(), s.covariance(), alpha);
}

/// Generalized (2 - alpha)-covariance of phi(t) = [t, vec(t t^T)] under a
/// 1-d or 2-d beta-Gaussian, by quadrature over the support.
inline Matrix statistics_covariance(const BetaGaussianParams& p,
                                    int angle_nodes = 128) {
  const int n = p.dim();
  const int m = n + n * n;
  const double beta = p.alpha.beta();
  const auto phi = [n](std::span<const double> t, int k) {
    if (k < n) return t[k];
    const int idx = k - n;
    return t[idx % n] * t[idx / n];  // column-major vec(t t^T)
  };
  const auto weight = [&](std::span<const double> t) {
    const double d = beta_gaussian_pdf(p, t);
    if (d <= 0.0) return 0.0;
    return beta == 0.0 ? 1.0 : std::pow(d, beta);
  };
  const double mass = integrate_over_support(p, weight, angle_nodes);
  // fourth-moment sized integrands: keep the error target relative
  const double extent = p.is_gaussian() ? 12.0 : p.radius;
  const double reach =
      1.0 + p.mu.norm() +
      extent * std::sqrt(p.sigma_tilde.eigenvalues().maxCoeff());
  const double tol = 1e-12 * std::max(1.0, mass) * std::pow(reach, 4);
  Vector first(m);
  for (int k = 0; k < m; ++k) {
    first(k) = integrate_over_support(
        p, [&](std::span<const double> t) { return weight(t) * phi(t, k); },
        angle_nodes, tol);
  }
  Matrix h(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) {
      const double cross = integrate_over_support(
          p,
          [&](std::span<const double> t) {
            return weight(t) * phi(t, i) * phi(t, j);
          },
          angle_nodes, tol);
      h(i, j) = h(j, i) = cross - first(i) * first(j) / mass;
    }
  }
  return h;
}

/// FY loss, gradient and (optionally) Hessian in canonical coordinates for
/// the score f_theta = theta^T phi against the beta-Gaussian matching the
/// statistics v. gradient = mu(theta) - v; Hessian = cov_{p,2-alpha}(phi, phi).
inline FyEvaluation fy_gradient_hessian(const Vector& theta, const Statistics& v,
                                        Alpha alpha, bool with_hessian = true) {
  constexpr const char* kCtx = "fy_gradient_hessian";
  detail::require(theta.size() == v.v.size(), Errc::shape_mismatch,
                  "theta and statistics lengths differ", kCtx);
  auto [mu, sigma] = from_canonical(theta);
  const auto p_hat = make_beta_gaussian(alpha, mu, sigma);
  const auto target = moment_match(v.mean(), v.covariance(), alpha);

  FyEvaluation out;
  const double offset = 0.5 * p_hat.sigma.inv_quad(p_hat.mu);
  out.loss = conjugate_quadratic(p_hat) + offset +
             beta_gaussian_negentropy(target) - theta.dot(v.v);
  out.gradient = expected_statistics(p_hat).v - v.v;
  if (with_hessian) {
    detail::require(p_hat.dim() <= 2, Errc::unsupported,
                    "Hessian quadrature is implemented for N <= 2", kCtx);
    out.hessian = statistics_covariance(p_hat);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Heteroscedastic regression
// ---------------------------------------------------------------------------

/// mu_f(x) = w_mu x + b_mu, sigma_f^2(x) = (w_sigma x + b_sigma)^2.
struct HeteroscedasticModel {
  double w_mu = 0.0;
  double b_mu = 0.0;
  double w_sigma = 0.0;
  double b_sigma = 1.0;

  double mean(double x) const { return w_mu * x + b_mu; }
  double scale(double x) const { return w_sigma * x + b_sigma; }
};

struct HeteroscedasticFit {
  HeteroscedasticModel model;
  double train_loss = 0.0;
  int iterations = 0;
};

/// Mean per-point loss of a model on (x, y) data; +inf if any variance is 0.
inline double mean_regression_loss(const HeteroscedasticModel& m,
                                   std::span<const double> x,
                                   std::span<const double> y, Alpha alpha) {
  double total = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double sc = m.scale(x[i]);
    const double s = sc * sc;
    if (!(s > 0.0)) return std::numeric_limits<double>::infinity();
    total += point_loss(m.mean(x[i]), s, y[i], alpha);
  }
  return total / static_cast<double>(x.size());
}

struct HeteroscedasticOptions {
  int steps = 200;
  bool fix_w_sigma = false;  // baseline: homoscedastic model
  double gradient_tol = 1e-10;
};

/// Damped Newton on the mean point loss. The Hessian is a central
/// difference of the analytic gradient; a Levenberg shift is raised until
/// the step lowers the loss, and steps that make any sigma_f^2 vanish are
/// rejected the same way.
inline HeteroscedasticFit heteroscedastic_fit(std::span<const double> x,
                                              std::span<const double> y,
                                              Alpha alpha,
                                              HeteroscedasticModel init,
                                              HeteroscedasticOptions opt = {}) {
  constexpr const char* kCtx = "heteroscedastic_fit";
  detail::require(x.size() == y.size(), Errc::shape_mismatch,
                  "x and y lengths differ", kCtx);
  detail::require(x.size() >= 4, Errc::domain, "need at least 4 data points",
                  kCtx);
  detail::require(alpha.is_shannon() ||
                      (alpha.value() > 1.0 && alpha.value() <= 2.0),
                  Errc::unsupported, "alpha must be 1 or in (1, 2]", kCtx);
  const double n = static_cast<double>(x.size());
  using V4 = Eigen::Vector4d;
  const auto pack = [](const HeteroscedasticModel& m) {
    return V4(m.w_mu, m.b_mu, m.w_sigma, m.b_sigma);
  };
  const auto unpack = [](const V4& v) {
    return HeteroscedasticModel{v(0), v(1), v(2), v(3)};
  };
  const auto gradient = [&](const V4& v) {
    const auto m = unpack(v);
    V4 g = V4::Zero();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double sc = m.scale(x[i]);
      const auto [dmu, ds] = point_loss_gradient(m.mean(x[i]), sc * sc, y[i],
                                                 alpha);
      g(0) += dmu * x[i];
      g(1) += dmu;
      g(2) += ds * 2.0 * sc * x[i];
      g(3) += ds * 2.0 * sc;
    }
    g /= n;
    if (opt.fix_w_sigma) g(2) = 0.0;
    return g;
  };

  HeteroscedasticFit fit{init, mean_regression_loss(init, x, y, alpha), 0};
  detail::require(std::isfinite(fit.train_loss), Errc::domain,
                  "initial model has a zero variance on the data", kCtx);
  V4 w = pack(init);
  double lambda = 1e-3;
  for (int it = 0; it < opt.steps; ++it) {
    const V4 g = gradient(w);
    if (g.norm() < opt.gradient_tol) break;
    Eigen::Matrix4d h;
    for (int k = 0; k < 4; ++k) {
      const double d = 1e-5 * std::max(1.0, std::abs(w(k)));
      V4 wp = w, wm = w;
      wp(k) += d;
      wm(k) -= d;
      h.col(k) = (gradient(wp) - gradient(wm)) / (2.0 * d);
    }
    h = 0.5 * (h + h.transpose()).eval();
    if (opt.fix_w_sigma) {
      h.row(2).setZero();
      h.col(2).setZero();
      h(2, 2) = 1.0;
    }
    bool accepted = false;
    for (int tries = 0; tries < 60; ++tries) {
      const Eigen::Matrix4d shifted =
          h + lambda * (1.0 + h.diagonal().cwiseAbs().maxCoeff()) *
                  Eigen::Matrix4d::Identity();
      Eigen::LLT<Eigen::Matrix4d> llt(shifted);
      if (llt.info() == Eigen::Success) {
        const V4 trial = w - llt.solve(g);
        const double loss = mean_regression_loss(unpack(trial), x, y, alpha);
        if (std::isfinite(loss) && loss <= fit.train_loss) {
          w = trial;
          fit.train_loss = loss;
          accepted = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    fit.iterations = it + 1;
    if (!accepted) break;
    lambda = std::max(lambda * 0.1, 1e-12);
  }
  fit.model = unpack(w);
  // (w_sigma, b_sigma) and its negation give the same model.
  if (fit.model.b_sigma < 0.0) {
    fit.model.w_sigma = -fit.model.w_sigma;
    fit.model.b_sigma = -fit.model.b_sigma;
  }
  return fit;
}

struct RegressionData {
  std::vector<double> x;
  std::vector<double> y;
};

/// Synthetic data from the model itself: x ~ U(0, 1), y ~ N_beta(mu_f(x),
/// sigma_f^2(x)). A unit draw is stretched by sigma_tilde^{1/2} =
/// |scale|^{1 - e}, not by |scale|, since the shape is |Sigma|^{-e} Sigma.
inline RegressionData synthetic_regression_data(const HeteroscedasticModel& m,
                                                Alpha alpha, int n,
                                                RngState& rng) {
  const auto unit = make_beta_gaussian(alpha, 0.0, 1.0);
  const double stretch = alpha.is_shannon()
                             ? 1.0
                             : 1.0 - beta_gaussian_det_exponent(1, alpha);
  RegressionData d;
  d.x.reserve(static_cast<std::size_t>(n));
  d.y.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform();
    const double eps = sample_beta_gaussian(unit, 1, rng)(0, 0);
    d.x.push_back(x);
    d.y.push_back(m.mean(x) + std::pow(std::abs(m.scale(x)), stretch) * eps);
  }
  return d;
}

}  // namespace sparsedist
