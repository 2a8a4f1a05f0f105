// SPDX-License-Identifier: Apache-2.0
//
// Constructors and evaluators for the sparse continuous and discrete
// families produced by the Tsallis-regularized prediction map: beta-Gaussians
// (truncated paraboloid at alpha = 2), triangular, truncated Gaussian, generic
// location-scale members, sparse Poisson and sparse integer Gaussian.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "sparsedist/error.hpp"
#include "sparsedist/linalg.hpp"
#include "sparsedist/quadrature.hpp"
#include "sparsedist/roots.hpp"
#include "sparsedist/special.hpp"
#include "sparsedist/tsallis.hpp"

namespace sparsedist {

// ---------------------------------------------------------------------------
// beta-Gaussians
// ---------------------------------------------------------------------------

/// N_beta(t; mu, Sigma) with beta = 2 - alpha, alpha in [1, 2].
///
/// For alpha > 1 the density is [(alpha - 1)(-tau - (t-mu)^T Sigma^{-1}
/// (t-mu) / 2)]_+^{1/(alpha-1)}, supported on the open ellipsoid
/// (t-mu)^T sigma_tilde^{-1} (t-mu) < radius^2. For alpha = 1 it is the
/// Gaussian N(mu, Sigma); radius is +inf, tau is NaN and sigma_tilde = Sigma.
struct BetaGaussianParams {
  Alpha alpha{1.0};
  Vector mu;
  SpdMatrix sigma;
  double radius = std::numeric_limits<double>::infinity();
  double tau = std::numeric_limits<double>::quiet_NaN();
  SpdMatrix sigma_tilde;

  int dim() const { return static_cast<int>(mu.size()); }
  bool is_gaussian() const { return alpha.is_shannon(); }
};

/// 1 / (N + 2 / (alpha - 1)), the exponent applied to |Sigma| throughout.
inline double beta_gaussian_det_exponent(int n, Alpha alpha) {
  return 1.0 / (n + 2.0 / (alpha.value() - 1.0));
}

/// Radius of the supporting sphere of the standard beta-Gaussian
/// N_beta(0, I); depends on N and alpha only.
inline double beta_gaussian_radius(int n, Alpha alpha) {
  constexpr const char* kCtx = "beta_gaussian_radius";
  detail::require(n >= 1, Errc::domain, "dimension must be >= 1", kCtx);
  if (alpha.is_shannon()) return std::numeric_limits<double>::infinity();
  const double am1 = alpha.value() - 1.0;
  detail::require(am1 > 0.0, Errc::domain, "radius needs alpha > 1", kCtx);
  const double shape = alpha.value() / am1;
  const double log_inner = log_gamma(0.5 * n + shape) - log_gamma(shape) -
                           0.5 * n * std::log(std::numbers::pi) +
                           std::log(2.0 / am1) / am1;
  return std::exp(log_inner * am1 / (2.0 + am1 * n));
}

/// Builds a beta-Gaussian and caches radius, threshold and sigma_tilde.
/// Throws for alpha outside [1, 2] or a dimension mismatch.
inline BetaGaussianParams make_beta_gaussian(Alpha alpha, Vector mu,
                                             SpdMatrix sigma) {
  constexpr const char* kCtx = "make_beta_gaussian";
  detail::require(alpha.value() >= 1.0 || alpha.is_shannon(), Errc::unsupported,
                  "alpha < 1 (heavy tails) is out of the implemented range",
                  kCtx);
  detail::require(alpha.value() <= 2.0, Errc::unsupported,
                  "alpha > 2 is out of the implemented range", kCtx);
  detail::require(mu.size() == sigma.dim(), Errc::shape_mismatch,
                  "mu and Sigma dimensions differ", kCtx);
  detail::require(mu.allFinite(), Errc::domain, "mu must be finite", kCtx);
  BetaGaussianParams p;
  p.alpha = alpha.is_shannon() ? Alpha(1.0) : alpha;
  p.mu = std::move(mu);
  p.sigma = std::move(sigma);
  const int n = p.dim();
  if (p.alpha.is_shannon()) {
    p.sigma_tilde = p.sigma;
    return p;
  }
  const double e = beta_gaussian_det_exponent(n, p.alpha);
  const double det_scale = std::exp(-e * p.sigma.log_det());
  p.radius = beta_gaussian_radius(n, p.alpha);
  p.tau = -0.5 * p.radius * p.radius * det_scale;
  p.sigma_tilde = p.sigma.scaled(det_scale);
  return p;
}

inline BetaGaussianParams make_beta_gaussian(Alpha alpha, double mu,
                                             double sigma2) {
  return make_beta_gaussian(alpha, Vector::Constant(1, mu),
                            SpdMatrix::scalar(sigma2));
}

/// Density of a beta-Gaussian at t.
inline double beta_gaussian_pdf(const BetaGaussianParams& p,
                                std::span<const double> t) {
  detail::require(static_cast<int>(t.size()) == p.dim(), Errc::shape_mismatch,
                  "point dimension differs from the density", "pdf");
  const Vector d = Eigen::Map<const Vector>(t.data(), p.dim()) - p.mu;
  const double quad = p.sigma.inv_quad(d);
  if (p.is_gaussian()) {
    const int n = p.dim();
    return std::exp(-0.5 * quad - 0.5 * n * std::log(2.0 * std::numbers::pi) -
                    0.5 * p.sigma.log_det());
  }
  const double q = -p.tau - 0.5 * quad;
  if (q <= 0.0) return 0.0;
  const double am1 = p.alpha.value() - 1.0;
  if (am1 == 1.0) return q;
  return std::exp(std::log(am1 * q) / am1);
}

/// Mean and covariance: Var = radius^2 / (N + 2 alpha / (alpha - 1)) *
/// sigma_tilde, and Var = Sigma for the Gaussian member.
inline std::pair<Vector, Matrix> mean_variance(const BetaGaussianParams& p) {
  if (p.is_gaussian()) return {p.mu, p.sigma.matrix()};
  const double a = p.alpha.value();
  const double c = p.radius * p.radius / (p.dim() + 2.0 * a / (a - 1.0));
  return {p.mu, c * p.sigma_tilde.matrix()};
}

/// Closed-form Tsallis negentropy of a beta-Gaussian (Shannon negentropy
/// -0.5 log det(2 pi e Sigma) for the Gaussian member).
inline double beta_gaussian_negentropy(const BetaGaussianParams& p) {
  const int n = p.dim();
  if (p.is_gaussian()) {
    return -0.5 * n * (1.0 + std::log(2.0 * std::numbers::pi)) -
           0.5 * p.sigma.log_det();
  }
  const double a = p.alpha.value();
  const double e = beta_gaussian_det_exponent(n, p.alpha);
  return -1.0 / (a * (a - 1.0)) +
         p.radius * p.radius * std::exp(-e * p.sigma.log_det()) /
             (2.0 * a + n * (a - 1.0));
}

/// Squared 2-Wasserstein distance between two beta-Gaussians sharing alpha
/// and dimension.
inline double wasserstein2(const BetaGaussianParams& p1,
                           const BetaGaussianParams& p2) {
  constexpr const char* kCtx = "wasserstein2";
  detail::require(p1.alpha.value() == p2.alpha.value(), Errc::domain,
                  "alpha mismatch", kCtx);
  detail::require(p1.dim() == p2.dim(), Errc::shape_mismatch,
                  "dimension mismatch", kCtx);
  double coef = 1.0;
  if (!p1.is_gaussian()) {
    const double a = p1.alpha.value();
    coef = p1.radius * p1.radius / (p1.dim() + 2.0 * a / (a - 1.0));
  }
  return (p1.mu - p2.mu).squaredNorm() +
         coef * bures_squared(p1.sigma_tilde, p2.sigma_tilde);
}

/// Integral of h(t) over the support of a 1-d or 2-d beta-Gaussian (a
/// 12-sigma box for the Gaussian member). In 2-d the integral runs in
/// whitened polar coordinates t = mu + sigma_tilde^{1/2} rho (cos th, sin th):
/// adaptive in rho, periodic trapezoid in th.
template <class H>
double integrate_over_support(const BetaGaussianParams& p, H&& h,
                              int angle_nodes = 128, double tol = 1e-11) {
  constexpr const char* kCtx = "integrate_over_support";
  detail::require(p.dim() <= 2, Errc::unsupported,
                  "quadrature expectations are implemented for N <= 2", kCtx);
  QuadratureOptions opt;
  opt.tol = tol;
  // Radial integral over [0, rmax]. With compact support, rho = R (1 - w^4)
  // flattens the (R - rho)^gamma edge behaviour of escort-type integrands.
  const auto radial_integral = [&](auto&& g) {
    if (p.is_gaussian()) return integrate(g, {0.0, 12.0}, {}, opt);
    const double r = p.radius;
    const auto mapped = [&](double w) {
      const double w3 = w * w * w;
      return g(r * (1.0 - w3 * w)) * 4.0 * r * w3;
    };
    return integrate(mapped, {0.0, 1.0}, {}, opt);
  };
  if (p.dim() == 1) {
    const double s = std::sqrt(p.sigma_tilde.matrix()(0, 0));
    const auto f = [&](double rho) {
      const std::array<double, 1> lo{p.mu(0) - s * rho};
      const std::array<double, 1> hi{p.mu(0) + s * rho};
      return h(std::span<const double>(lo)) + h(std::span<const double>(hi));
    };
    return s * radial_integral(f);
  }
  const Matrix& root = p.sigma_tilde.sqrt();
  const double jac = std::exp(0.5 * p.sigma_tilde.log_det());
  const auto ring = [&](double th) {
    const Vector dir = root * Vector{{std::cos(th), std::sin(th)}};
    const auto radial = [&](double rho) {
      const std::array<double, 2> pt{p.mu(0) + rho * dir(0),
                                     p.mu(1) + rho * dir(1)};
      return rho * h(std::span<const double>(pt));
    };
    return radial_integral(radial);
  };
  return jac * integrate_periodic(ring, angle_nodes);
}

/// E_p[g(t)] for a 1-d or 2-d beta-Gaussian by quadrature.
template <class G>
double expect_beta_gaussian(const BetaGaussianParams& p, G&& g,
                            int angle_nodes = 128, double tol = 1e-11) {
  return integrate_over_support(
      p,
      [&](std::span<const double> t) { return g(t) * beta_gaussian_pdf(p, t); },
      angle_nodes, tol);
}

// ---------------------------------------------------------------------------
// Location-scale members of the 2-sparse family
// ---------------------------------------------------------------------------

/// Convex generator g of a location-scale score f(t) = -g'(|t-mu|/sigma)/sigma.
/// Built-in kernels carry a name so they can be serialized.
struct ScaleKernel {
  std::string name;  // "cubic", "quadratic", "gaussian" or "custom"
  double kappa = 1.0;
  std::function<double(double)> g;
  std::function<double(double)> dg;

  /// g(t) = t^3 / 6: truncated parabola.
  static ScaleKernel cubic() {
    return {"cubic", 1.0, [](double t) { return t * t * t / 6.0; },
            [](double t) { return 0.5 * t * t; }};
  }
  /// g(t) = t^2 / 2: triangular.
  static ScaleKernel quadratic() {
    return {"quadratic", 1.0, [](double t) { return 0.5 * t * t; },
            [](double t) { return t; }};
  }
  /// g(t) = -kappa/2 erf(t / sqrt 2): truncated Gaussian.
  static ScaleKernel gaussian(double kappa) {
    return {"gaussian", kappa,
            [kappa](double t) {
              return -0.5 * kappa * std::erf(t / std::numbers::sqrt2);
            },
            [kappa](double t) { return -kappa * std_normal_pdf(t); }};
  }
  static ScaleKernel from_name(std::string_view name, double kappa = 1.0) {
    if (name == "cubic") return cubic();
    if (name == "quadratic") return quadratic();
    if (name == "gaussian") return gaussian(kappa);
    throw Error(Errc::parse, "unknown scale kernel '" + std::string(name) + "'",
                "ScaleKernel::from_name");
  }
};

/// Solves a g'(a) - g(a) + g(0) = 1/2 for the support half-width (in scale
/// units) by expanding a bracket from [0, 1].
inline double solve_location_scale_halfwidth(const ScaleKernel& k) {
  const double g0 = k.g(0.0);
  const auto eq = [&](double a) { return a * k.dg(a) - k.g(a) + g0 - 0.5; };
  return find_root_expanding(eq, 0.0, 1.0, 1e-15);
}

struct LocationScaleParams {
  ScaleKernel kernel;
  double mu = 0.0;
  double sigma = 1.0;
  double a = 0.0;    // half-width in scale units; support mu +- a sigma
  double tau = 0.0;  // -g'(a) / sigma
};

/// Generic location-scale member: tau = -g'(a)/sigma with a from the
/// normalization equation. Throws Errc::no_bracket when g is not convex
/// enough for a root to exist.
inline LocationScaleParams make_location_scale(ScaleKernel kernel, double mu,
                                               double sigma) {
  constexpr const char* kCtx = "make_location_scale";
  detail::require(sigma > 0.0 && std::isfinite(sigma), Errc::domain,
                  "scale must be positive", kCtx);
  detail::require(static_cast<bool>(kernel.g) && static_cast<bool>(kernel.dg),
                  Errc::domain, "kernel needs g and g'", kCtx);
  LocationScaleParams p;
  p.a = solve_location_scale_halfwidth(kernel);
  p.tau = -kernel.dg(p.a) / sigma;
  p.kernel = std::move(kernel);
  p.mu = mu;
  p.sigma = sigma;
  return p;
}

inline double location_scale_pdf(const LocationScaleParams& p, double t) {
  const double u = std::abs(t - p.mu) / p.sigma;
  if (u >= p.a) return 0.0;
  return std::max(0.0, -p.tau - p.kernel.dg(u) / p.sigma);
}

/// Triangular Tri(t; mu, b): [-tau - |t - mu| / b]_+, tau = -1/sqrt(b).
struct TriangularParams {
  double mu = 0.0;
  double b = 1.0;
  double tau = -1.0;
  double half_width() const { return std::sqrt(b); }
};

inline TriangularParams make_triangular(double mu, double b) {
  detail::require(b > 0.0 && std::isfinite(b), Errc::domain, "b must be > 0",
                  "make_triangular");
  return {mu, b, -1.0 / std::sqrt(b)};
}

/// Truncated Gaussian [kappa N(t; mu, sigma2) - tau]_+ with tau =
/// kappa N(a; 0, sigma2) and a solving
///   1/kappa + 2a/(sqrt(2 pi) sigma) exp(-a^2/(2 sigma2)) = erf(a/(sqrt2 sigma)).
/// kappa = 1 is the full Gaussian (a = inf, tau = 0).
struct TruncatedGaussianParams {
  double kappa = 1.0;
  double mu = 0.0;
  double sigma2 = 1.0;
  double a = std::numeric_limits<double>::infinity();
  double tau = 0.0;
};

inline TruncatedGaussianParams make_truncated_gaussian(double kappa, double mu,
                                                       double sigma2) {
  constexpr const char* kCtx = "make_truncated_gaussian";
  detail::require(kappa >= 1.0 && std::isfinite(kappa), Errc::domain,
                  "kappa must be >= 1", kCtx);
  detail::require(sigma2 > 0.0 && std::isfinite(sigma2), Errc::domain,
                  "sigma^2 must be positive", kCtx);
  TruncatedGaussianParams p{kappa, mu, sigma2};
  if (kappa == 1.0) return p;
  const double s = std::sqrt(sigma2);
  const auto eq = [&](double a) {
    return std::erf(a / (std::numbers::sqrt2 * s)) - 1.0 / kappa -
           2.0 * a / (std::sqrt(2.0 * std::numbers::pi) * s) *
               std::exp(-a * a / (2.0 * sigma2));
  };
  p.a = find_root_expanding(eq, 0.0, 6.0 * s * kappa, 1e-15);
  p.tau = kappa * normal_pdf(p.a, 0.0, sigma2);
  return p;
}

inline double truncated_gaussian_pdf(const TruncatedGaussianParams& p,
                                     double t) {
  if (std::abs(t - p.mu) >= p.a) return 0.0;
  return std::max(0.0, p.kappa * normal_pdf(t, p.mu, p.sigma2) - p.tau);
}

// ---------------------------------------------------------------------------
// Discrete families
// ---------------------------------------------------------------------------

enum class IntegerFamily { sparse_poisson, sparse_integer_gaussian };

/// Sparse integer distribution [f(t) - tau]_+ on N (Poisson) or Z (integer
/// Gaussian). pmf[i] is the mass at t_min + i; t_min..t_max is exactly the
/// set of integers with positive mass.
struct IntegerParams {
  IntegerFamily kind = IntegerFamily::sparse_integer_gaussian;
  double mu = 0.0;
  double tau = 0.0;
  std::int64_t t_min = 0;
  std::int64_t t_max = 0;
  std::vector<double> pmf;

  double score(std::int64_t t) const {
    if (kind == IntegerFamily::sparse_poisson) {
      return static_cast<double>(t) * std::log(mu) -
             log_gamma(static_cast<double>(t) + 1.0);
    }
    const double d = static_cast<double>(t) - mu;
    return -0.5 * d * d;
  }
  double mass(std::int64_t t) const {
    if (t < t_min || t > t_max) return 0.0;
    return pmf[static_cast<std::size_t>(t - t_min)];
  }
};

/// Hard cap on the number of integers in the sparsemax window.
inline constexpr std::int64_t kMaxIntegerWindow = 1'000'000;

namespace detail {

inline IntegerParams solve_integer_family(IntegerParams p, std::int64_t mode,
                                          bool bounded_below) {
  constexpr const char* kCtx = "make_sparse_integer";
  std::int64_t half = 8;
  while (true) {
    const std::int64_t lo = bounded_below ? std::max<std::int64_t>(0, mode - half)
                                          : mode - half;
    const std::int64_t hi = mode + half;
    require(hi - lo + 1 <= kMaxIntegerWindow, Errc::no_convergence,
            "sparsemax window exceeds 10^6 points", kCtx);
    std::vector<double> f;
    f.reserve(static_cast<std::size_t>(hi - lo + 1));
    for (std::int64_t t = lo; t <= hi; ++t) f.push_back(p.score(t));
    const double tau = sparsemax_threshold(f);
    const bool left_ok = (bounded_below && lo == 0) || f.front() < tau - 1e-12;
    const bool right_ok = f.back() < tau - 1e-12;
    if (left_ok && right_ok) {
      p.tau = tau;
      std::int64_t first = hi + 1;
      std::int64_t last = lo - 1;
      for (std::int64_t t = lo; t <= hi; ++t) {
        if (f[static_cast<std::size_t>(t - lo)] > tau) {
          first = std::min(first, t);
          last = std::max(last, t);
        }
      }
      p.t_min = first;
      p.t_max = last;
      p.pmf.clear();
      for (std::int64_t t = first; t <= last; ++t) {
        p.pmf.push_back(f[static_cast<std::size_t>(t - lo)] - tau);
      }
      return p;
    }
    half *= 2;
  }
}

}  // namespace detail

/// Sparse Poisson [t log mu - log t! - tau]_+ on t = 0, 1, 2, ...
inline IntegerParams make_sparse_poisson(double mu) {
  detail::require(mu > 0.0 && std::isfinite(mu), Errc::domain,
                  "Poisson mean must be positive", "make_sparse_poisson");
  IntegerParams p;
  p.kind = IntegerFamily::sparse_poisson;
  p.mu = mu;
  return detail::solve_integer_family(
      std::move(p), static_cast<std::int64_t>(std::floor(mu)), true);
}

/// Sparse integer Gaussian [-(t - mu)^2 / 2 - tau]_+ on the integers.
inline IntegerParams make_sparse_integer_gaussian(double mu) {
  detail::require(std::isfinite(mu) && std::abs(mu) < 1e15, Errc::domain,
                  "mu must be finite", "make_sparse_integer_gaussian");
  IntegerParams p;
  p.kind = IntegerFamily::sparse_integer_gaussian;
  p.mu = mu;
  return detail::solve_integer_family(
      std::move(p), static_cast<std::int64_t>(std::llround(mu)), false);
}

/// Finite alpha-entmax distribution of a score vector over {0, ..., K-1}.
struct FiniteParams {
  Alpha alpha{2.0};
  std::vector<double> scores;
  FiniteDistribution probs;
};

inline FiniteParams make_finite(std::vector<double> scores, Alpha alpha) {
  FiniteParams p{alpha, std::move(scores), {}};
  p.probs = entmax_finite(p.scores, alpha);
  return p;
}

// ---------------------------------------------------------------------------
// Tagged parameter record
// ---------------------------------------------------------------------------

enum class Family {
  beta_gaussian,
  truncated_parabola,  // alpha = 2 beta-Gaussian, any dimension
  triangular,
  truncated_gaussian,
  location_scale,
  sparse_poisson,
  sparse_integer_gaussian,
  finite,
};

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::beta_gaussian: return "beta_gaussian";
    case Family::truncated_parabola: return "truncated_parabola";
    case Family::triangular: return "triangular";
    case Family::truncated_gaussian: return "truncated_gaussian";
    case Family::location_scale: return "location_scale";
    case Family::sparse_poisson: return "sparse_poisson";
    case Family::sparse_integer_gaussian: return "sparse_integer_gaussian";
    case Family::finite: return "finite";
  }
  return "unknown";
}

inline Family parse_family(std::string_view name) {
  for (Family f : {Family::beta_gaussian, Family::truncated_parabola,
                   Family::triangular, Family::truncated_gaussian,
                   Family::location_scale, Family::sparse_poisson,
                   Family::sparse_integer_gaussian, Family::finite}) {
    if (family_name(f) == name) return f;
  }
  throw Error(Errc::parse, "unknown family '" + std::string(name) + "'",
              "parse_family");
}

struct DensityParams {
  Family family;
  std::variant<BetaGaussianParams, TriangularParams, TruncatedGaussianParams,
               LocationScaleParams, IntegerParams, FiniteParams>
      record;

  template <class T>
  const T& as() const {
    const T* r = std::get_if<T>(&record);
    detail::require(r != nullptr, Errc::domain,
                    "parameter record does not match the requested family",
                    "DensityParams::as");
    return *r;
  }
};

inline DensityParams wrap(BetaGaussianParams p) {
  return {Family::beta_gaussian, std::move(p)};
}
inline DensityParams wrap(TriangularParams p) {
  return {Family::triangular, p};
}
inline DensityParams wrap(TruncatedGaussianParams p) {
  return {Family::truncated_gaussian, p};
}
inline DensityParams wrap(LocationScaleParams p) {
  return {Family::location_scale, std::move(p)};
}
inline DensityParams wrap(IntegerParams p) {
  const Family f = p.kind == IntegerFamily::sparse_poisson
                       ? Family::sparse_poisson
                       : Family::sparse_integer_gaussian;
  return {f, std::move(p)};
}
inline DensityParams wrap(FiniteParams p) { return {Family::finite, std::move(p)}; }

/// Multivariate truncated paraboloid [-tau - (t-mu)^T Sigma^{-1} (t-mu)/2]_+
/// with tau = -(Gamma(N/2 + 2) / sqrt(det(2 pi Sigma)))^{2/(2+N)}. The
/// record is an alpha = 2 beta-Gaussian whose radius is recovered from tau.
inline DensityParams make_truncated_paraboloid(Vector mu, SpdMatrix sigma) {
  detail::require(mu.size() == sigma.dim(), Errc::shape_mismatch,
                  "mu and Sigma dimensions differ",
                  "make_truncated_paraboloid");
  const int n = sigma.dim();
  BetaGaussianParams p;
  p.alpha = Alpha(2.0);
  p.mu = std::move(mu);
  p.sigma = std::move(sigma);
  const double log_tau_mag =
      2.0 / (2.0 + n) *
      (log_gamma(0.5 * n + 2.0) -
       0.5 * (n * std::log(2.0 * std::numbers::pi) + p.sigma.log_det()));
  p.tau = -std::exp(log_tau_mag);
  const double det_scale = std::exp(-p.sigma.log_det() / (n + 2.0));
  p.radius = std::sqrt(-2.0 * p.tau / det_scale);
  p.sigma_tilde = p.sigma.scaled(det_scale);
  return {Family::truncated_parabola, std::move(p)};
}

/// Entropic index of the regularizer that produced the density.
inline Alpha density_alpha(const DensityParams& d) {
  if (const auto* bg = std::get_if<BetaGaussianParams>(&d.record)) {
    return bg->alpha;
  }
  if (const auto* fp = std::get_if<FiniteParams>(&d.record)) return fp->alpha;
  return Alpha(2.0);
}

/// Threshold tau of the density (NaN for the Gaussian member).
inline double density_tau(const DensityParams& d) {
  return std::visit(
      [](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, FiniteParams>) {
          if (r.alpha.is_shannon()) return std::numeric_limits<double>::quiet_NaN();
          return entmax_threshold(r.scores, r.alpha);
        } else {
          return r.tau;
        }
      },
      d.record);
}

inline int density_dim(const DensityParams& d) {
  if (const auto* bg = std::get_if<BetaGaussianParams>(&d.record)) {
    return bg->dim();
  }
  return 1;
}

inline bool is_discrete(const DensityParams& d) {
  return std::holds_alternative<IntegerParams>(d.record) ||
         std::holds_alternative<FiniteParams>(d.record);
}

// ---------------------------------------------------------------------------
// Supports
// ---------------------------------------------------------------------------

struct FullSpace {
  int dim = 1;
};
/// Open interval (lo, hi).
struct IntervalSupport {
  double lo;
  double hi;
};
/// Open ellipsoid {t : (t - center)^T shape_inv (t - center) < radius2}.
struct EllipsoidSupport {
  Vector center;
  Matrix shape_inv;
  double radius2;
};
/// Integers t_min..t_max inclusive.
struct IntegerWindow {
  std::int64_t t_min;
  std::int64_t t_max;
};
/// Explicit index set (finite domains, support need not be contiguous).
struct IndexSet {
  std::vector<std::int64_t> indices;
};

using SupportDescriptor = std::variant<FullSpace, IntervalSupport,
                                       EllipsoidSupport, IntegerWindow, IndexSet>;

inline SupportDescriptor support(const DensityParams& d) {
  return std::visit(
      [](const auto& r) -> SupportDescriptor {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BetaGaussianParams>) {
          if (r.is_gaussian()) return FullSpace{r.dim()};
          if (r.dim() == 1) {
            const double h = r.radius * std::sqrt(r.sigma_tilde.matrix()(0, 0));
            return IntervalSupport{r.mu(0) - h, r.mu(0) + h};
          }
          return EllipsoidSupport{r.mu, r.sigma_tilde.inverse(),
                                  r.radius * r.radius};
        } else if constexpr (std::is_same_v<T, TriangularParams>) {
          return IntervalSupport{r.mu - r.half_width(), r.mu + r.half_width()};
        } else if constexpr (std::is_same_v<T, TruncatedGaussianParams>) {
          if (std::isinf(r.a)) return FullSpace{1};
          return IntervalSupport{r.mu - r.a, r.mu + r.a};
        } else if constexpr (std::is_same_v<T, LocationScaleParams>) {
          return IntervalSupport{r.mu - r.a * r.sigma, r.mu + r.a * r.sigma};
        } else if constexpr (std::is_same_v<T, IntegerParams>) {
          return IntegerWindow{r.t_min, r.t_max};
        } else {
          IndexSet s;
          for (std::size_t i = 0; i < r.probs.size(); ++i) {
            if (r.probs.probs[i] > 0.0) s.indices.push_back(static_cast<std::int64_t>(i));
          }
          return s;
        }
      },
      d.record);
}

inline bool support_contains(const SupportDescriptor& s,
                             std::span<const double> t) {
  return std::visit(
      [&](const auto& r) -> bool {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, FullSpace>) {
          return true;
        } else if constexpr (std::is_same_v<T, IntervalSupport>) {
          return t[0] > r.lo && t[0] < r.hi;
        } else if constexpr (std::is_same_v<T, EllipsoidSupport>) {
          const Vector d = Eigen::Map<const Vector>(t.data(), r.center.size()) -
                           r.center;
          return d.dot(r.shape_inv * d) < r.radius2;
        } else if constexpr (std::is_same_v<T, IntegerWindow>) {
          return t[0] == std::floor(t[0]) &&
                 t[0] >= static_cast<double>(r.t_min) &&
                 t[0] <= static_cast<double>(r.t_max);
        } else {
          if (t[0] != std::floor(t[0])) return false;
          const auto k = static_cast<std::int64_t>(t[0]);
          return std::find(r.indices.begin(), r.indices.end(), k) !=
                 r.indices.end();
        }
      },
      s);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

/// Density (or mass, for discrete families) at t. Exactly zero outside the
/// support; discrete families are zero at non-integers.
inline double pdf(const DensityParams& d, std::span<const double> t) {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BetaGaussianParams>) {
          return beta_gaussian_pdf(r, t);
        } else {
          detail::require(t.size() == 1, Errc::shape_mismatch,
                          "univariate family needs a scalar point", "pdf");
          const double x = t[0];
          if constexpr (std::is_same_v<T, TriangularParams>) {
            return std::max(0.0, -r.tau - std::abs(x - r.mu) / r.b);
          } else if constexpr (std::is_same_v<T, TruncatedGaussianParams>) {
            return truncated_gaussian_pdf(r, x);
          } else if constexpr (std::is_same_v<T, LocationScaleParams>) {
            return location_scale_pdf(r, x);
          } else if constexpr (std::is_same_v<T, IntegerParams>) {
            if (x != std::floor(x)) return 0.0;
            return r.mass(static_cast<std::int64_t>(x));
          } else {
            if (x != std::floor(x) || x < 0 ||
                x >= static_cast<double>(r.probs.size())) {
              return 0.0;
            }
            return r.probs.probs[static_cast<std::size_t>(x)];
          }
        }
      },
      d.record);
}

inline double pdf(const DensityParams& d, double t) {
  return pdf(d, std::span<const double>(&t, 1));
}

/// Integral of g(t) p(t) over the support of a univariate continuous
/// density, split at the support ends (and the mode) so C0 corners are
/// handled exactly.
template <class G>
double expect_1d(const DensityParams& d, G&& g, double tol = 1e-11) {
  const auto s = support(d);
  const auto* iv = std::get_if<IntervalSupport>(&s);
  const auto integrand = [&](double t) { return g(t) * pdf(d, t); };
  QuadratureOptions opt;
  opt.tol = tol;
  if (iv != nullptr) {
    const double mid = 0.5 * (iv->lo + iv->hi);
    const std::array<double, 1> kinks{mid};
    return integrate(integrand, {iv->lo, iv->hi}, kinks, opt);
  }
  return integrate_line(integrand, Interval::whole_line(), {}, opt);
}

/// Tsallis negentropy of any supported density. Closed forms for
/// beta-Gaussians, truncated parabolas and triangular; quadrature or exact
/// sums otherwise.
inline double tsallis_negentropy(const DensityParams& d) {
  return std::visit(
      [&](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BetaGaussianParams>) {
          return beta_gaussian_negentropy(r);
        } else if constexpr (std::is_same_v<T, TriangularParams>) {
          return -0.5 + 1.0 / (3.0 * std::sqrt(r.b));
        } else if constexpr (std::is_same_v<T, IntegerParams>) {
          double s = 0.0;
          for (double q : r.pmf) s += q * q;
          return 0.5 * (s - 1.0);
        } else if constexpr (std::is_same_v<T, FiniteParams>) {
          return tsallis_negentropy_finite(r.probs, r.alpha);
        } else {
          // alpha = 2 members: (int p^2 - 1) / 2
          const double sq = expect_1d(d, [&](double t) { return pdf(d, t); });
          return 0.5 * (sq - 1.0);
        }
      },
      d.record);
}

}  // namespace sparsedist
