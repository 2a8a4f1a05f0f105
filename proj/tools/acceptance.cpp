// SPDX-License-Identifier: Apache-2.0
// Acceptance run: one PASS/FAIL line per criterion, with runtime against the
// stated budget. Exit status is nonzero if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "sparsedist/sparsedist.hpp"

namespace sd = sparsedist;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a check; the first failing check names the detail.
  void check(bool ok, const std::string& what) {
    if (!ok && pass) detail = what;
    pass = pass && ok;
  }
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double sphere_area(int n) {
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

// tau solving mass(tau) = 1 for [(alpha-1)(-tau - r^2/2)]_+^{1/(alpha-1)}
// over R^n with unit-determinant quadratic form, scaled by sqrt|Sigma|.
// The mass is homogeneous of degree n/2 + 1/(alpha-1) in -tau, so one radial
// quadrature at tau = -1 fixes it.
double tau_by_root(double alpha, int n, double sqrt_det) {
  const double am1 = alpha - 1.0;
  const double r0 = std::sqrt(2.0);
  const auto g = [&](double x) {
    const double r = r0 * x;
    const double q = am1 * (1.0 - 0.5 * r * r);
    return q > 0.0 ? r0 * std::pow(r, n - 1) * std::pow(q, 1.0 / am1) : 0.0;
  };
  const double unit = sphere_area(n) * sqrt_det *
                      sd::integrate(g, {0.0, 1.0}, {}, {.tol = 1e-13});
  return -std::pow(unit, -1.0 / (0.5 * n + 1.0 / am1));
}

// ---------------------------------------------------------------------------

Outcome closed_form_normalizers() {
  Outcome o;
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double s = 0.2 * std::pow(25.0, k / 19.0);  // 0.2 .. 5
    // truncated parabola, f = -t^2 / (2 s^2)
    const double tp = -0.5 * std::pow(1.5 / s, 2.0 / 3.0);
    // the cubic kernel at scale c has f = -t^2 / (2 c^3)
    const double tp_ls = sd::make_location_scale(sd::ScaleKernel::cubic(), 0.0,
                                                 std::pow(s, 2.0 / 3.0))
                             .tau;
    const double tp_root = tau_by_root(2.0, 1, s);
    const double tp_bg = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, s * s).tau;
    // triangular, b = s
    const double tr = -1.0 / std::sqrt(s);
    const double tr_ls =
        sd::make_location_scale(sd::ScaleKernel::quadratic(), 0.0, std::sqrt(s))
            .tau;
    const double tr_fam = sd::make_triangular(0.0, s).tau;
    // truncated paraboloid in N = 2 and 3
    double dev = 0.0;
    for (int n : {2, 3}) {
      const sd::Matrix base = (sd::Matrix(3, 3) << 0.6, 0.4, 0.1, 0.4, 0.48, 0.0,
                               0.1, 0.0, 0.9)
                                  .finished()
                                  .topLeftCorner(n, n);
      const auto sig = sd::spd_decompose(s * base);
      const double closed =
          -std::pow(std::tgamma(0.5 * n + 2.0) /
                        std::sqrt(std::pow(2.0 * std::numbers::pi, n) * sig.det()),
                    2.0 / (n + 2.0));
      const auto para = sd::make_truncated_paraboloid(sd::Vector::Zero(n), sig);
      const double root = tau_by_root(2.0, n, std::sqrt(sig.det()));
      dev = std::max({dev, std::abs(sd::density_tau(para) - closed),
                      std::abs(root - closed)});
    }
    // beta-Gaussian via its radius, alpha in {4/3, 3/2}, N in {1, 2}
    for (double a : {4.0 / 3.0, 1.5}) {
      for (int n : {1, 2}) {
        const sd::Matrix m = n == 1 ? sd::Matrix::Constant(1, 1, s)
                                    : (s * (sd::Matrix(2, 2) << 0.6, 0.4, 0.4,
                                            0.48).finished()).eval();
        const auto sig = sd::spd_decompose(m);
        const auto bg = sd::make_beta_gaussian(sd::Alpha(a), sd::Vector::Zero(n),
                                               sig);
        const double root = tau_by_root(a, n, std::sqrt(sig.det()));
        dev = std::max(dev, std::abs(bg.tau - root));
      }
    }
    worst = std::max({worst, std::abs(tp - tp_ls), std::abs(tp - tp_root),
                      std::abs(tp - tp_bg), std::abs(tr - tr_ls),
                      std::abs(tr - tr_fam), dev});
  }
  o.check(worst <= 1e-10, "max |tau difference| " + num(worst));
  if (o.pass) o.detail = "max |tau difference| " + num(worst);
  return o;
}

// ---------------------------------------------------------------------------

double mass_1d(const sd::DensityParams& d) {
  const double mu = std::visit(
      [](const auto& r) -> double {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, sd::BetaGaussianParams>) {
          return r.mu(0);
        } else if constexpr (requires { r.mu; }) {
          return r.mu;
        } else {
          return 0.0;
        }
      },
      d.record);
  const auto f = [&](double t) { return sd::pdf(d, t); };
  const std::array<double, 1> kink{mu};
  const sd::QuadratureOptions opt{.tol = 1e-12};
  const auto s = sd::support(d);
  if (const auto* iv = std::get_if<sd::IntervalSupport>(&s)) {
    return sd::integrate(f, {iv->lo, iv->hi}, kink, opt);
  }
  return sd::integrate_line(f, sd::Interval::whole_line(), kink, opt);
}

Outcome normalization() {
  Outcome o;
  int configs = 0;
  double w1 = 0.0, w2 = 0.0, wd = 0.0;
  // univariate continuous: 36 beta-Gaussians + 18 other families
  for (double a : {1.0, 1.25, 4.0 / 3.0, 1.5, 1.75, 2.0}) {
    for (double s2 : {0.25, 1.0, 4.0}) {
      for (double mu : {0.0, 1.3}) {
        w1 = std::max(w1, std::abs(mass_1d(sd::wrap(
                              sd::make_beta_gaussian(sd::Alpha(a), mu, s2))) -
                                   1.0));
        ++configs;
      }
    }
  }
  for (double b : {0.1, 0.5, 1.0, 2.0, 5.0, 20.0}) {
    w1 = std::max(w1, std::abs(mass_1d(sd::wrap(sd::make_triangular(-0.4, b))) - 1.0));
    ++configs;
  }
  for (double kappa : {1.5, 2.0, 3.0}) {
    for (double s2 : {0.5, 2.0}) {
      w1 = std::max(w1, std::abs(mass_1d(sd::wrap(
                            sd::make_truncated_gaussian(kappa, 0.2, s2))) -
                                 1.0));
      ++configs;
    }
  }
  for (const char* k : {"cubic", "quadratic", "gaussian"}) {
    for (double s : {0.5, 2.0}) {
      w1 = std::max(w1, std::abs(mass_1d(sd::wrap(sd::make_location_scale(
                            sd::ScaleKernel::from_name(k, 2.0), 0.7, s))) -
                                 1.0));
      ++configs;
    }
  }
  // bivariate by polar quadrature: 4 alphas x 4 covariances
  const sd::Matrix covs[] = {
      sd::Matrix::Identity(2, 2),
      (sd::Matrix(2, 2) << 0.6, 0.4, 0.4, 0.48).finished(),
      (sd::Matrix(2, 2) << 2.0, -0.3, -0.3, 0.2).finished(),
      (sd::Matrix(2, 2) << 0.05, 0.0, 0.0, 3.0).finished()};
  for (double a : {1.0, 4.0 / 3.0, 1.5, 2.0}) {
    for (const auto& c : covs) {
      const auto p = sd::make_beta_gaussian(sd::Alpha(a), sd::Vector{{0.3, -1.0}},
                                            sd::spd_decompose(c));
      const double z = sd::expect_beta_gaussian(
          p, [](std::span<const double>) { return 1.0; });
      w2 = std::max(w2, std::abs(z - 1.0));
      ++configs;
    }
  }
  // discrete: exact sums
  const auto sum_discrete = [](const sd::DensityParams& d) {
    double s = 0.0;
    if (const auto* ip = std::get_if<sd::IntegerParams>(&d.record)) {
      for (std::int64_t t = ip->t_min; t <= ip->t_max; ++t) {
        s += sd::pdf(d, static_cast<double>(t));
      }
    } else {
      const auto& fp = std::get<sd::FiniteParams>(d.record);
      for (std::size_t i = 0; i < fp.probs.probs.size(); ++i) {
        s += sd::pdf(d, static_cast<double>(i));
      }
    }
    return s;
  };
  for (double mu : {0.3, 1.0, 2.5, 7.0, 20.0, 150.0}) {
    wd = std::max(wd, std::abs(sum_discrete(sd::wrap(sd::make_sparse_poisson(mu))) - 1.0));
    wd = std::max(wd, std::abs(sum_discrete(sd::wrap(
                                   sd::make_sparse_integer_gaussian(mu - 3.1))) -
                               1.0));
    configs += 2;
  }
  std::mt19937_64 rng(17);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 18; ++trial) {
    std::vector<double> f(3 + trial % 7);
    for (double& v : f) v = 2.0 * z(rng);
    const double a = std::array{1.0, 1.5, 2.0}[trial % 3];
    wd = std::max(wd, std::abs(sum_discrete(sd::wrap(sd::make_finite(f, sd::Alpha(a)))) - 1.0));
    ++configs;
  }
  o.check(configs >= 100, "only " + std::to_string(configs) + " configurations");
  o.check(w1 <= 1e-9, "1-d mass error " + num(w1));
  o.check(w2 <= 1e-5, "2-d mass error " + num(w2));
  o.check(wd <= 1e-12, "discrete mass error " + num(wd));
  if (o.pass) {
    o.detail = std::to_string(configs) + " configs; 1-d " + num(w1) + ", 2-d " +
               num(w2) + ", discrete " + num(wd);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome moment_reproduction() {
  Outcome o;
  // Epanechnikov on [-1, 1]: sigma^2 = 2/3 puts the support edge at 1.
  const auto epa = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 2.0 / 3.0);
  const double formula = sd::mean_variance(epa).second(0, 0);
  const double quad = sd::integrate(
      [](double t) { return t * t * 0.75 * (1.0 - t * t); }, {-1.0, 1.0}, {},
      {.tol = 1e-14});
  sd::RngState rng(3);
  const int n = 100000;
  const sd::Matrix s = sd::sample_beta_gaussian(epa, n, rng);
  const double mean = s.col(0).mean();
  const double mc = (s.col(0).array() - mean).square().mean();
  const double se = std::sqrt((3.0 / 35.0 - 0.04) / n);
  o.check(std::abs(formula - 0.2) < 1e-12, "formula variance " + num(formula));
  o.check(std::abs(quad - 0.2) < 1e-12, "quadrature variance " + num(quad));
  o.check(std::abs(mc - 0.2) < 3.0 * se, "Monte-Carlo variance " + num(mc));

  // bivariate covariance of the figure example
  const auto sig = sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48});
  double worst_z = 0.0;
  std::uint64_t stream = 0;
  for (double a : {4.0 / 3.0, 1.5, 2.0}) {
    const auto p = sd::make_beta_gaussian(sd::Alpha(a), sd::Vector::Zero(2), sig);
    const sd::Matrix v = sd::mean_variance(p).second;
    sd::RngState r2 = sd::RngState(5).derive(stream++);
    const sd::Matrix x = sd::sample_beta_gaussian(p, n, r2);
    const sd::Matrix c = x.rowwise() - x.colwise().mean();
    for (int i = 0; i < 2; ++i) {
      for (int k = i; k < 2; ++k) {
        const sd::Vector prod = c.col(i).cwiseProduct(c.col(k));
        const double est = prod.mean();
        const double sd_prod =
            std::sqrt((prod.array() - est).square().sum() / (n - 1.0));
        worst_z = std::max(worst_z, std::abs(est - v(i, k)) / (sd_prod / std::sqrt(n)));
      }
    }
  }
  o.check(worst_z < 3.0, "bivariate covariance off by " + num(worst_z) + " sigma");
  if (o.pass) {
    o.detail = "Epanechnikov MC " + num(mc) + "; bivariate max " + num(worst_z) +
               " sigma";
  }
  return o;
}

// ---------------------------------------------------------------------------

double gaussian_kl(const sd::Vector& mu, const sd::SpdMatrix& s,
                   const sd::Vector& mu_f, const sd::SpdMatrix& s_f) {
  const auto n = static_cast<double>(mu.size());
  const sd::Vector d = mu_f - mu;
  return 0.5 * ((s_f.inverse() * s.matrix()).trace() + d.dot(s_f.inverse() * d) -
                n + s_f.log_det() - s.log_det());
}

Outcome fenchel_young() {
  Outcome o;
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> um(-1.0, 1.0), ue(0.3, 2.0),
      ua(0.0, std::numbers::pi);
  const auto random_spd = [&](int n) {
    if (n == 1) return sd::SpdMatrix::scalar(ue(rng));
    const double th = ua(rng);
    sd::Matrix q(2, 2);
    q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
    return sd::spd_decompose(q * sd::Vector{{ue(rng), ue(rng)}}.asDiagonal() *
                             q.transpose());
  };
  const auto random_mu = [&](int n) {
    sd::Vector m(n);
    for (int i = 0; i < n; ++i) m(i) = um(rng);
    return m;
  };
  double min_loss = 0.0, worst_zero = 0.0, min_mismatch = 1e300;
  double worst_grad = 0.0, worst_psd = 0.0, worst_kl = 0.0, worst_convex = 0.0;
  for (double a : {1.0, 4.0 / 3.0, 1.5, 2.0}) {
    const sd::Alpha alpha(a);
    for (int n : {1, 2}) {
      for (int trial = 0; trial < 6; ++trial) {
        const auto target = sd::make_beta_gaussian(alpha, random_mu(n), random_spd(n));
        const auto v = sd::expected_statistics(target);
        const sd::Vector mu_f = random_mu(n);
        const auto s_f = random_spd(n);
        const sd::Vector theta = sd::to_canonical(mu_f, s_f);
        const auto ev = sd::fy_gradient_hessian(theta, v, alpha, true);
        min_loss = std::min(min_loss, ev.loss);
        min_loss = std::min(min_loss, sd::fy_loss_beta_gaussian(mu_f, s_f, target));
        min_mismatch = std::min(min_mismatch, ev.loss);

        // zero at the matching parameters
        const sd::Vector own = sd::to_canonical(target.mu, target.sigma);
        worst_zero = std::max(worst_zero,
                              std::abs(sd::fy_gradient_hessian(own, v, alpha, false).loss));

        // central differences of the loss in canonical coordinates
        const auto loss_at = [&](const sd::Vector& t) {
          return sd::fy_gradient_hessian(t, v, alpha, false).loss;
        };
        sd::Vector fd(theta.size());
        for (Eigen::Index k = 0; k < theta.size(); ++k) {
          const double h = 1e-4;
          auto at = [&](double d) {
            sd::Vector t = theta;
            t(k) += d;
            return loss_at(t);
          };
          fd(k) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
        }
        worst_grad = std::max(worst_grad, (fd - ev.gradient).norm() /
                                              std::max(1.0, ev.gradient.norm()));

        const Eigen::SelfAdjointEigenSolver<sd::Matrix> es(*ev.hessian);
        worst_psd = std::max(worst_psd, -es.eigenvalues().minCoeff() /
                                            es.eigenvalues().cwiseAbs().maxCoeff());

        // convexity along a segment to another valid score
        const sd::Vector theta1 = sd::to_canonical(random_mu(n), random_spd(n));
        const double l0 = loss_at(theta), l1 = loss_at(theta1);
        for (double t : {0.25, 0.5, 0.75}) {
          const double lt = loss_at((1 - t) * theta + t * theta1);
          worst_convex = std::max(worst_convex, lt - ((1 - t) * l0 + t * l1));
        }

        // alpha -> 1 against the Gaussian KL
        if (a == 1.0 && n == 1) {
          const auto near = sd::make_beta_gaussian(sd::Alpha(1.001), target.mu,
                                                   target.sigma);
          worst_kl = std::max(
              worst_kl,
              std::abs(sd::fy_loss_beta_gaussian(mu_f, s_f, near) -
                       gaussian_kl(target.mu, target.sigma, mu_f, s_f)));
        }
      }
    }
  }
  o.check(min_loss >= -1e-12, "negative loss " + num(min_loss));
  o.check(worst_zero <= 1e-6, "loss at matching parameters " + num(worst_zero));
  o.check(min_mismatch > 1e-6, "mismatched loss too small " + num(min_mismatch));
  o.check(worst_grad <= 1e-5, "gradient relative error " + num(worst_grad));
  o.check(worst_psd <= 1e-8, "Hessian negative eigenvalue " + num(worst_psd));
  o.check(worst_kl <= 1e-3, "alpha=1.001 vs KL " + num(worst_kl));
  o.check(worst_convex <= 1e-10, "convexity violation " + num(worst_convex));
  if (o.pass) {
    o.detail = "grad rel " + num(worst_grad) + ", KL gap " + num(worst_kl) +
               ", zero " + num(worst_zero);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome moment_matching() {
  Outcome o;
  double worst_mu = 0.0, worst_sigma = 0.0;
  std::uint64_t stream = 0;
  for (double a : {4.0 / 3.0, 1.5, 2.0}) {
    for (int n : {1, 2}) {
      const sd::Matrix m = n == 1 ? sd::Matrix::Constant(1, 1, 0.7)
                                  : (sd::Matrix(2, 2) << 0.6, 0.4, 0.4, 0.48).finished();
      const sd::Vector mu = sd::Vector::LinSpaced(n, 1.0, -2.0);
      const auto truth = sd::make_beta_gaussian(sd::Alpha(a), mu, sd::spd_decompose(m));
      sd::RngState rng = sd::RngState(29).derive(stream++);
      const auto fit = sd::fit_moment_matching(
          sd::sample_beta_gaussian(truth, 100000, rng), sd::Alpha(a));
      for (int i = 0; i < n; ++i) {
        worst_mu = std::max(worst_mu,
                            std::abs(fit.mu(i) - mu(i)) / std::sqrt(m(i, i)));
        for (int k = 0; k < n; ++k) {
          worst_sigma = std::max(worst_sigma,
                                 std::abs(fit.sigma.matrix()(i, k) - m(i, k)) /
                                     std::abs(m(i, k)));
        }
      }
    }
  }
  o.check(worst_mu <= 0.02, "mean error " + num(worst_mu) + " sigma");
  o.check(worst_sigma <= 0.05, "Sigma relative error " + num(worst_sigma));
  if (o.pass) {
    o.detail = "mu " + num(worst_mu) + " sigma-scale, Sigma " + num(worst_sigma) +
               " relative";
  }
  return o;
}

// ---------------------------------------------------------------------------

sd::Matrix fd_jacobian(const sd::QuadraticScore& s, const sd::AttentionBasis& b,
                       double h) {
  const sd::Vector theta = s.canonical();
  sd::Matrix out(b.size(), theta.size());
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    auto at = [&](double d) {
      sd::Vector t = theta;
      t(k) += d;
      return sd::attention(sd::QuadraticScore::from_canonical(t, s.alpha), b, false).r;
    };
    out.col(k) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return out;
}

double rel_error(const sd::Matrix& got, const sd::Matrix& ref) {
  return (got - ref).cwiseAbs().maxCoeff() /
         std::max(ref.cwiseAbs().maxCoeff(), 1e-12);
}

sd::SpdMatrix rotated(double th, double e0, double e1) {
  sd::Matrix q(2, 2);
  q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  return sd::spd_decompose(q * sd::Vector{{e0, e1}}.asDiagonal() * q.transpose());
}

Outcome attention_kernels() {
  Outcome o;
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> um(-1.0, 1.0), uv(0.3, 2.0),
      ubm(-2.0, 2.0), ubv(0.05, 1.0), ua(0.0, std::numbers::pi);
  double fwd = 0.0, jac1 = 0.0;
  for (double a : {1.0, 4.0 / 3.0, 1.5, 2.0}) {
    for (int trial = 0; trial < 20; ++trial) {
      const sd::QuadraticScore s{sd::Vector::Constant(1, um(rng)),
                                 sd::SpdMatrix::scalar(uv(rng)), sd::Alpha(a)};
      sd::AttentionBasis b;
      for (int j = 0; j < 4; ++j) {
        b.components.push_back({sd::Vector::Constant(1, ubm(rng)),
                                sd::SpdMatrix::scalar(ubv(rng))});
      }
      const auto res = sd::attention(s, b);
      const auto p = sd::make_beta_gaussian(s.alpha, s.mu, s.sigma);
      const double var = s.sigma.matrix()(0, 0), mu = s.mu(0);
      const double half = p.is_gaussian() ? 14.0 * std::sqrt(var)
                                          : std::sqrt(-2.0 * p.tau * var);
      for (int j = 0; j < b.size(); ++j) {
        const double mj = b.components[j].mu(0);
        const double vj = b.components[j].sigma.matrix()(0, 0);
        const std::array<double, 1> kink{std::clamp(mj, mu - half, mu + half)};
        const double q = sd::integrate(
            [&](double t) {
              const std::array<double, 1> pt{t};
              return sd::beta_gaussian_pdf(p, pt) * sd::normal_pdf(t, mj, vj);
            },
            {mu - half, mu + half}, kink, {.tol = 1e-14});
        fwd = std::max(fwd, std::abs(res.r(j) - q));
      }
      jac1 = std::max(jac1, rel_error(*res.jacobian, fd_jacobian(s, b, 1e-4)));
    }
  }
  double jac2 = 0.0;
  for (double a : {1.0, 2.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const sd::QuadraticScore s{sd::Vector{{0.5 * um(rng), 0.5 * um(rng)}},
                                 rotated(ua(rng), 0.3 + 1.2 * (um(rng) + 1) / 2,
                                         0.3 + 1.2 * (um(rng) + 1) / 2),
                                 sd::Alpha(a)};
      sd::AttentionBasis b;
      for (int j = 0; j < 3; ++j) {
        b.components.push_back({sd::Vector{{um(rng), um(rng)}},
                                rotated(ua(rng), 0.1 + 0.35 * (um(rng) + 1),
                                        0.1 + 0.35 * (um(rng) + 1))});
      }
      jac2 = std::max(jac2, rel_error(*sd::attention(s, b).jacobian,
                                      fd_jacobian(s, b, 1e-4)));
    }
  }
  // 2-d sparsemax forward against Monte-Carlo
  const sd::QuadraticScore s2{sd::Vector{{0.1, -0.2}},
                              sd::SpdMatrix::from_rows(2, {0.6, 0.1, 0.1, 0.5}),
                              sd::Alpha(2.0)};
  sd::AttentionBasis b2{
      {{sd::Vector{{0.3, 0.0}}, sd::SpdMatrix::from_rows(2, {0.2, 0.05, 0.05, 0.3})},
       {sd::Vector{{-0.5, 0.4}}, sd::SpdMatrix::from_rows(2, {0.5, 0.0, 0.0, 0.5})}},
      std::nullopt};
  const auto r2 = sd::attention_forward_2d(s2, b2);
  sd::RngState mrng(37);
  const int n = 1000000;
  const auto samples = sd::sample_beta_gaussian(
      sd::make_beta_gaussian(s2.alpha, s2.mu, s2.sigma), n, mrng);
  double mc_z = 0.0;
  for (int j = 0; j < 2; ++j) {
    double m = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const std::array<double, 2> t{samples(i, 0), samples(i, 1)};
      const double v = b2.evaluate(t)(j);
      m += v;
      m2 += v * v;
    }
    m /= n;
    mc_z = std::max(mc_z, std::abs(r2(j) - m) / std::sqrt((m2 / n - m * m) / n));
  }
  // discrete Jacobian on a fine grid approaches the continuous one
  double cont = 0.0;
  {
    const int l = 4096;
    const double lo = -6.0, h = 12.0 / l;
    const sd::AttentionBasis b{
        {{sd::Vector::Constant(1, 0.0), sd::SpdMatrix::scalar(0.3)},
         {sd::Vector::Constant(1, 0.5), sd::SpdMatrix::scalar(0.1)},
         {sd::Vector::Constant(1, -0.8), sd::SpdMatrix::scalar(0.6)}},
        std::nullopt};
    for (double a : {1.0, 2.0}) {
      const sd::QuadraticScore s{sd::Vector::Constant(1, 0.2),
                                 sd::SpdMatrix::scalar(0.5), sd::Alpha(a)};
      const sd::Vector theta = s.canonical();
      std::vector<double> f(l);
      sd::Matrix phi(l, 2), psi(l, b.size());
      for (int i = 0; i < l; ++i) {
        const double t = lo + (i + 0.5) * h;
        phi(i, 0) = t;
        phi(i, 1) = t * t;
        // sparsemax sees h f so that its output lives on the h-simplex
        f[i] = (theta(0) * t + theta(1) * t * t) * (a == 2.0 ? h : 1.0);
        const std::array<double, 1> pt{t};
        psi.row(i) = b.evaluate(pt).transpose();
      }
      const auto disc = sd::discrete_attention(f, sd::Alpha(a));
      const sd::Matrix jd =
          psi.transpose() * (a == 2.0 ? h : 1.0) * disc.jacobian * phi;
      const auto res = sd::attention(s, b);
      cont = std::max({cont, (psi.transpose() * disc.probs - res.r).cwiseAbs().maxCoeff(),
                       (jd - *res.jacobian).cwiseAbs().maxCoeff()});
    }
  }
  o.check(fwd <= 1e-9, "1-d forward vs quadrature " + num(fwd));
  o.check(jac1 <= 1e-5, "1-d Jacobian vs FD " + num(jac1));
  o.check(jac2 <= 1e-4, "2-d Jacobian vs FD " + num(jac2));
  o.check(mc_z <= 3.0, "2-d sparsemax vs MC " + num(mc_z) + " sigma");
  o.check(cont <= 1e-3, "continuum limit " + num(cont));
  if (o.pass) {
    o.detail = "fwd " + num(fwd) + ", J1 " + num(jac1) + ", J2 " + num(jac2) +
               ", MC " + num(mc_z) + " sigma, L=4096 " + num(cont);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome fusedmax() {
  Outcome o;
  double worst = 0.0;
  for (double sigma : {0.3, 1.0, 2.5}) {
    for (double gamma : {0.0, 0.1, 0.5, 1.0, 2.0}) {
      for (auto s : {sd::EvenScore::parabola(sigma), sd::EvenScore::abs(sigma)}) {
        const auto c = sd::rof_fusedmax_closed(s, gamma);
        const auto g = sd::rof_fusedmax(s, gamma);
        worst = std::max({worst, std::abs(g.a - c.a), std::abs(g.b - c.b),
                          std::abs(g.tau - c.tau)});
      }
    }
  }
  const double b = sd::sobolev_smooth(sd::EvenScore::parabola(1.0), 1.0).b;

  const auto cont = sd::rof_fusedmax_closed(sd::EvenScore::parabola(1.0), 1.0);
  const auto grid_error = [&](double h) {
    const int n = static_cast<int>(std::lround(6.0 / h));
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) {
      const double t = -3.0 + (i + 0.5) * h;
      f[i] = -0.5 * t * t;
    }
    const auto p = sd::discrete_fusedmax(f, 1.0, h);
    double err = 0.0;
    for (int i = 0; i < n; ++i) {
      err = std::max(err, std::abs(p[i] - cont.pdf(-3.0 + (i + 0.5) * h)));
    }
    return err;
  };
  bool monotone = true;
  double prev = std::numeric_limits<double>::infinity();
  for (double h = 0.1; h > 1.5e-3; h *= 0.5) {
    const double e = grid_error(h);
    monotone = monotone && e < prev;
    prev = e;
  }
  const double fine = grid_error(1e-3);
  o.check(worst <= 1e-10, "closed vs generic " + num(worst));
  o.check(std::abs(b - 1.98) <= 0.01, "Sobolev root b = " + num(b));
  o.check(monotone, "grid error not monotone");
  o.check(fine < 1e-2, "h=1e-3 sup error " + num(fine));
  if (o.pass) {
    o.detail = "closed vs generic " + num(worst) + ", b = " +
               std::to_string(b).substr(0, 6) + ", h=1e-3 error " + num(fine);
  }
  return o;
}

// ---------------------------------------------------------------------------

Outcome regression() {
  Outcome o;
  const sd::HeteroscedasticModel truth{2.0, 0.0, 0.5, 0.1};
  double worst_mu = 0.0, worst_sigma = 0.0, worst_gap = -1e300;
  std::uint64_t stream = 0;
  for (double a : {1.0, 4.0 / 3.0, 1.5, 2.0}) {
    const sd::Alpha alpha(a);
    sd::RngState rng = sd::RngState(41).derive(stream++);
    const auto train = sd::synthetic_regression_data(truth, alpha, 10000, rng);
    const auto test = sd::synthetic_regression_data(truth, alpha, 10000, rng);
    const auto fit = sd::heteroscedastic_fit(train.x, train.y, alpha,
                                             {0.0, 0.0, 0.0, 1.0});
    worst_mu = std::max(worst_mu, std::abs(fit.model.w_mu - 2.0) / 2.0);
    worst_sigma = std::max(worst_sigma, std::abs(fit.model.w_sigma - 0.5) / 0.5);
    sd::HeteroscedasticOptions base;
    base.fix_w_sigma = true;
    const auto flat = sd::heteroscedastic_fit(train.x, train.y, alpha,
                                              {0.0, 0.0, 0.0, 1.0}, base);
    worst_gap = std::max(worst_gap,
                         sd::mean_regression_loss(fit.model, test.x, test.y, alpha) -
                             sd::mean_regression_loss(flat.model, test.x, test.y, alpha));
  }
  // alpha = 2: points outside the modeled support keep a finite loss
  bool finite = true;
  for (double s2 : {0.01, 0.5, 3.0}) {
    const auto p = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, s2);
    const auto sup = std::get<sd::IntervalSupport>(sd::support(sd::wrap(p)));
    for (double y : {2.0 * sup.hi, 10.0 * sup.hi, 1e3}) {
      const std::array<double, 1> pt{y};
      finite = finite && sd::beta_gaussian_pdf(p, pt) == 0.0 &&
               std::isfinite(sd::cross_omega_loss(0.0, s2, y, sd::Alpha(2.0)));
    }
  }
  o.check(worst_mu <= 0.1, "w_mu relative error " + num(worst_mu));
  o.check(worst_sigma <= 0.1, "w_sigma relative error " + num(worst_sigma));
  o.check(finite, "cross-Omega loss not finite outside the support");
  o.check(worst_gap < 0.0, "baseline not beaten, gap " + num(worst_gap));
  if (o.pass) {
    o.detail = "w_mu " + num(worst_mu) + ", w_sigma " + num(worst_sigma) +
               " relative; held-out gap " + num(worst_gap);
  }
  return o;
}

// ---------------------------------------------------------------------------

std::string cli_artifacts() {
  const std::vector<std::vector<std::string>> cmds{
      {"make", "--family", "beta_gaussian", "--alpha", "4/3", "--mu", "0,0",
       "--sigma", "0.6,0.4,0.4,0.48"},
      {"sample", "--family", "beta_gaussian", "--alpha", "2", "--mu", "0",
       "--sigma", "0.6667", "-n", "20000", "--seed", "7"},
      {"regress", "--synthetic", "2000", "--seed", "3", "--alpha", "3/2"},
      {"fusedmax-demo", "--mode", "discrete", "--grid-h", "0.01"},
      {"figure", "--name", "moment-matching", "-n", "5000", "--seed", "2"},
      {"figure", "--name", "regression", "-n", "500", "--seed", "2"},
      {"figure", "--name", "fusedmax"},
      {"figure", "--name", "beta-gaussian-1d"}};
  std::string all;
  for (const auto& c : cmds) {
    std::ostringstream out, err;
    const int code = sd::cli::run(c, out, err);
    all += std::to_string(code) + "\n" + out.str() + err.str();
  }
  return all;
}

Outcome determinism() {
  Outcome o;
  const std::string first = cli_artifacts();
  const std::string second = cli_artifacts();
  o.check(first == second, "CLI artifacts differ between runs");
  o.check(first.find("\"code\"") == std::string::npos, "a CLI command failed");
  if (o.pass) o.detail = std::to_string(first.size()) + " bytes identical";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    double budget;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"closed-form normalizers", 1.0, closed_form_normalizers},
      {"normalization", 30.0, normalization},
      {"moment reproduction", 10.0, moment_reproduction},
      {"Fenchel-Young losses", 60.0, fenchel_young},
      {"moment-matching round trip", 60.0, moment_matching},
      {"attention kernels", 120.0, attention_kernels},
      {"fusedmax", 30.0, fusedmax},
      {"heteroscedastic regression", 60.0, regression},
      {"determinism", 1e300, determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& c : criteria) {
    ++index;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.budget;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::string budget = c.budget < 1e299 ? " < " + num(c.budget) + " s" : "";
    std::printf("%s %d %s (%.2f s%s) %s%s\n", pass ? "PASS" : "FAIL", index,
                c.name, secs, budget.c_str(), o.detail.c_str(),
                in_time ? "" : " [over budget]");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
