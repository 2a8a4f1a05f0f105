// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sparsedist/attention.hpp"
#include "sparsedist/quadrature.hpp"
#include "sparsedist/sampling.hpp"

namespace sd = sparsedist;

namespace {

const double kAlphas1d[] = {1.0, 4.0 / 3.0, 1.5, 2.0};

sd::BasisComponent component(double mu, double var) {
  return {sd::Vector::Constant(1, mu), sd::SpdMatrix::scalar(var)};
}

sd::QuadraticScore score1d(double a, double mu, double var) {
  return {sd::Vector::Constant(1, mu), sd::SpdMatrix::scalar(var), sd::Alpha(a)};
}

struct Case1d {
  sd::QuadraticScore score;
  sd::AttentionBasis basis;
};

Case1d random_case_1d(std::mt19937_64& rng, double a) {
  std::uniform_real_distribution<double> um(-1.0, 1.0), uv(0.3, 2.0),
      ubm(-2.0, 2.0), ubv(0.05, 1.0);
  Case1d c{score1d(a, um(rng), uv(rng)), {}};
  for (int j = 0; j < 4; ++j) c.basis.components.push_back(component(ubm(rng), ubv(rng)));
  return c;
}

sd::SpdMatrix random_spd2(std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> ue(lo, hi), ua(0.0, std::numbers::pi);
  const double th = ua(rng);
  sd::Matrix q(2, 2);
  q << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const sd::Vector e{{ue(rng), ue(rng)}};
  return sd::spd_decompose(q * e.asDiagonal() * q.transpose());
}

// Five-point central differences of the forward map in canonical coordinates.
sd::Matrix fd_jacobian(const sd::QuadraticScore& s, const sd::AttentionBasis& b,
                       double h) {
  const sd::Vector theta = s.canonical();
  sd::Matrix out(b.size(), theta.size());
  const auto fwd = [&](const sd::Vector& t) {
    return sd::attention(sd::QuadraticScore::from_canonical(t, s.alpha), b, false).r;
  };
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    auto at = [&](double d) {
      sd::Vector t = theta;
      t(k) += d;
      return fwd(t);
    };
    out.col(k) = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
  }
  return out;
}

double max_rel_error(const sd::Matrix& got, const sd::Matrix& ref) {
  const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1e-12);
  return (got - ref).cwiseAbs().maxCoeff() / scale;
}

// r_j by adaptive quadrature of pdf * psi_j over the support.
double quadrature_r(const sd::QuadraticScore& s, const sd::BasisComponent& c) {
  const auto p = sd::make_beta_gaussian(s.alpha, s.mu, s.sigma);
  const double mu = s.mu(0), var = s.sigma.matrix()(0, 0);
  const double half = p.is_gaussian() ? 14.0 * std::sqrt(var)
                                      : std::sqrt(-2.0 * p.tau * var);
  const double mj = c.mu(0), vj = c.sigma.matrix()(0, 0);
  const std::array<double, 1> kinks{std::clamp(mj, mu - half, mu + half)};
  return sd::integrate(
      [&](double t) {
        const std::array<double, 1> pt{t};
        return sd::beta_gaussian_pdf(p, pt) * sd::normal_pdf(t, mj, vj);
      },
      {mu - half, mu + half}, kinks, {.tol = 1e-14});
}

}  // namespace

TEST(Attention1d, SoftmaxExample) {
  sd::AttentionBasis b{{component(0.0, 0.5)}, std::nullopt};
  const auto r = sd::attention_forward_1d(score1d(1.0, 0.0, 0.5), b);
  EXPECT_NEAR(r(0), 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-15);
  EXPECT_NEAR(r(0), quadrature_r(score1d(1.0, 0.0, 0.5), b.components[0]), 1e-12);
}

TEST(Attention1d, ForwardMatchesQuadrature) {
  std::mt19937_64 rng(131);
  for (double a : kAlphas1d) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_case_1d(rng, a);
      const auto r = sd::attention_forward_1d(c.score, c.basis);
      for (int j = 0; j < c.basis.size(); ++j) {
        worst = std::max(worst, std::abs(r(j) - quadrature_r(c.score, c.basis.components[j])));
      }
    }
    EXPECT_LT(worst, 1e-9) << a;
  }
}

TEST(Attention1d, FarComponentVanishes) {
  for (double a : kAlphas1d) {
    sd::AttentionBasis b{{component(100.0, 1.0), component(0.0, 1.0)}, std::nullopt};
    const auto s = score1d(a, 0.0, 1.0);
    const auto r = sd::attention_forward_1d(s, b);
    EXPECT_LT(r(0), 1e-30);
    EXPECT_GT(r(1), 0.0);
    EXPECT_LE(r(1), 1.0 / std::sqrt(2.0 * std::numbers::pi));
    if (a > 1.0) {
      EXPECT_EQ(r(0), 0.0);
      EXPECT_EQ(sd::attention_backward_1d(s, b).row(0).cwiseAbs().maxCoeff(), 0.0);
    }
  }
}

TEST(Attention1d, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(137);
  for (double a : kAlphas1d) {
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
      const auto c = random_case_1d(rng, a);
      const auto jac = sd::attention_backward_1d(c.score, c.basis);
      worst = std::max(worst, max_rel_error(jac, fd_jacobian(c.score, c.basis, 1e-4)));
    }
    EXPECT_LT(worst, 1e-5) << a;
  }
}

TEST(Attention1d, JacobianMatchesEscortCovariance) {
  // cov_{p,2-alpha}(phi, psi) by direct quadrature of the escort weight.
  for (double a : kAlphas1d) {
    const auto s = score1d(a, 0.3, 0.8);
    sd::AttentionBasis b{{component(-0.2, 0.3)}, std::nullopt};
    const auto p = sd::make_beta_gaussian(s.alpha, s.mu, s.sigma);
    const auto w = [&](double t) {
      const std::array<double, 1> pt{t};
      const double d = sd::beta_gaussian_pdf(p, pt);
      return d > 0.0 ? std::pow(d, 2.0 - a) : 0.0;
    };
    const double half = p.is_gaussian() ? 12.0 : std::sqrt(-2.0 * p.tau * 0.8);
    const auto q = [&](auto g) {
      return sd::integrate(g, {0.3 - half, 0.3 + half}, std::array<double, 1>{0.3},
                           {.tol = 1e-13});
    };
    const auto psi = [](double t) { return sd::normal_pdf(t, -0.2, 0.3); };
    const double w0 = q(w);
    const double wpsi = q([&](double t) { return w(t) * psi(t); });
    const auto jac = sd::attention_backward_1d(s, b);
    for (int k = 1; k <= 2; ++k) {
      const double wphi = q([&](double t) { return w(t) * std::pow(t, k); });
      const double cross = q([&](double t) { return w(t) * std::pow(t, k) * psi(t); });
      EXPECT_NEAR(jac(0, k - 1), cross - wphi * wpsi / w0, 1e-10) << a;
    }
  }
}

TEST(Attention1d, SymmetricFirstRowEntryIsZero) {
  sd::AttentionBasis b{{component(0.4, 0.7)}, std::nullopt};
  const auto jac = sd::attention_backward_1d(score1d(1.0, 0.4, 0.7), b);
  EXPECT_NEAR(jac(0, 0), 0.0, 1e-16);
}

TEST(Attention1d, RejectsUnsupportedAlpha) {
  sd::AttentionBasis b{{component(0.0, 1.0)}, std::nullopt};
  EXPECT_THROW(sd::attention_forward_1d(score1d(1.25, 0.0, 1.0), b), sd::Error);
  EXPECT_THROW(sd::attention_forward_1d(score1d(0.5, 0.0, 1.0), b), sd::Error);
}

TEST(Attention2d, SoftmaxExample) {
  const auto half_i = sd::SpdMatrix::from_rows(2, {0.5, 0.0, 0.0, 0.5});
  sd::AttentionBasis b{{{sd::Vector::Zero(2), half_i}}, std::nullopt};
  const sd::QuadraticScore s{sd::Vector::Zero(2), half_i, sd::Alpha(1.0)};
  const auto r = sd::attention_forward_2d(s, b);
  EXPECT_NEAR(r(0), 1.0 / (2.0 * std::numbers::pi), 1e-15);
  // symmetric configuration: the first block of the row vanishes
  EXPECT_LT(sd::attention_backward_2d(s, b).row(0).head(2).cwiseAbs().maxCoeff(), 1e-16);
}

TEST(Attention2d, MatchesPolarQuadrature) {
  std::mt19937_64 rng(139);
  std::uniform_real_distribution<double> um(-0.5, 0.5);
  for (double a : {1.0, 2.0}) {
    for (int trial = 0; trial < 5; ++trial) {
      const sd::QuadraticScore s{sd::Vector{{um(rng), um(rng)}}, random_spd2(rng, 0.3, 1.5),
                                 sd::Alpha(a)};
      const sd::BasisComponent c{sd::Vector{{um(rng), um(rng)}}, random_spd2(rng, 0.2, 0.8)};
      const sd::AttentionBasis b{{c}, std::nullopt};
      const auto res = sd::attention(s, b);
      const auto p = sd::make_beta_gaussian(s.alpha, s.mu, s.sigma);
      const auto psi = [&](std::span<const double> t) { return b.evaluate(t)(0); };
      const auto pdf = [&](std::span<const double> t) { return sd::beta_gaussian_pdf(p, t); };
      const auto w = [&](std::span<const double> t) {
        return a == 1.0 ? pdf(t) : (pdf(t) > 0.0 ? 1.0 : 0.0);
      };
      const auto q = [&](auto g) { return sd::integrate_over_support(p, g, 256, 1e-12); };
      EXPECT_NEAR(res.r(0), q([&](std::span<const double> t) { return pdf(t) * psi(t); }),
                  1e-8);
      const double w0 = q(w);
      const double wpsi = q([&](std::span<const double> t) { return w(t) * psi(t); });
      const auto phi = [](std::span<const double> t, int k) {
        return k < 2 ? t[k] : t[(k - 2) % 2] * t[(k - 2) / 2];
      };
      for (int k = 0; k < 6; ++k) {
        const double wphi = q([&](std::span<const double> t) { return w(t) * phi(t, k); });
        const double cross =
            q([&](std::span<const double> t) { return w(t) * phi(t, k) * psi(t); });
        EXPECT_NEAR((*res.jacobian)(0, k), cross - wphi * wpsi / w0, 1e-7) << a << " " << k;
      }
    }
  }
}

TEST(Attention2d, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(149);
  std::uniform_real_distribution<double> um(-0.5, 0.5);
  for (double a : {1.0, 2.0}) {
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const sd::QuadraticScore s{sd::Vector{{um(rng), um(rng)}}, random_spd2(rng, 0.3, 1.5),
                                 sd::Alpha(a)};
      sd::AttentionBasis b;
      for (int j = 0; j < 3; ++j)
        b.components.push_back({sd::Vector{{2 * um(rng), 2 * um(rng)}}, random_spd2(rng, 0.1, 0.8)});
      worst = std::max(worst, max_rel_error(sd::attention_backward_2d(s, b),
                                            fd_jacobian(s, b, 1e-4)));
    }
    EXPECT_LT(worst, 1e-4) << a;
  }
}

TEST(Attention2d, SparsemaxMatchesMonteCarlo) {
  const sd::QuadraticScore s{sd::Vector{{0.1, -0.2}}, sd::SpdMatrix::from_rows(2, {0.6, 0.0, 0.0, 0.6}),
                             sd::Alpha(2.0)};
  sd::AttentionBasis b{{{sd::Vector{{0.3, 0.0}}, sd::SpdMatrix::from_rows(2, {0.2, 0.05, 0.05, 0.3})},
                        {sd::Vector{{-0.5, 0.4}}, sd::SpdMatrix::from_rows(2, {0.5, 0.0, 0.0, 0.5})}},
                       std::nullopt};
  const auto r = sd::attention_forward_2d(s, b);
  const auto p = sd::make_beta_gaussian(s.alpha, s.mu, s.sigma);
  sd::RngState rng(151);
  const int n = 1000000;
  const auto samples = sd::sample_beta_gaussian(p, n, rng);
  for (int j = 0; j < 2; ++j) {
    double m = 0.0, m2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const sd::Vector t = samples.row(i).transpose();
      const double v = b.evaluate(std::span<const double>(t.data(), 2))(j);
      m += v;
      m2 += v * v;
    }
    m /= n;
    const double se = std::sqrt((m2 / n - m * m) / n);
    EXPECT_NEAR(r(j), m, 3.0 * se) << j;
  }
}

TEST(Attention2d, AngularConvergenceAndFarComponent) {
  const sd::QuadraticScore s{sd::Vector{{0.0, 0.3}}, sd::SpdMatrix::from_rows(2, {0.9, 0.3, 0.3, 0.5}),
                             sd::Alpha(2.0)};
  sd::AttentionBasis b{{{sd::Vector{{0.2, 0.1}}, sd::SpdMatrix::from_rows(2, {0.1, 0.0, 0.0, 0.2})},
                        {sd::Vector{{50.0, 0.0}}, sd::SpdMatrix::from_rows(2, {1.0, 0.0, 0.0, 1.0})}},
                       std::nullopt};
  const auto r256 = sd::attention_forward_2d(s, b, 256);
  const auto r512 = sd::attention_forward_2d(s, b, 512);
  EXPECT_LT((r256 - r512).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LT(r256(1), 1e-20);
  EXPECT_THROW(sd::attention_forward_2d({s.mu, s.sigma, sd::Alpha(1.5)}, b), sd::Error);
}

TEST(DiscreteAttention, Examples) {
  const std::array<double, 2> f0{0.0, 0.0};
  const auto soft = sd::discrete_attention(f0, sd::Alpha(1.0));
  EXPECT_NEAR(soft.jacobian(0, 0), 0.25, 1e-16);
  EXPECT_NEAR(soft.jacobian(0, 1), -0.25, 1e-16);
  // finite differences of softmax
  const double h = 1e-6;
  const std::array<double, 2> fp{h, 0.0}, fm{-h, 0.0};
  const double fd = (sd::discrete_attention(fp, sd::Alpha(1.0)).probs(0) -
                     sd::discrete_attention(fm, sd::Alpha(1.0)).probs(0)) / (2 * h);
  EXPECT_NEAR(fd, 0.25, 1e-9);

  const std::array<double, 3> full{0.1, 0.0, 0.05};
  const auto sp = sd::discrete_attention(full, sd::Alpha(2.0));
  const sd::Matrix centered = sd::Matrix::Identity(3, 3) - sd::Matrix::Constant(3, 3, 1.0 / 3.0);
  EXPECT_LT((sp.jacobian - centered).cwiseAbs().maxCoeff(), 1e-15);

  const std::array<double, 3> single{5.0, 0.0, 0.0};
  EXPECT_EQ(sd::discrete_attention(single, sd::Alpha(2.0)).jacobian.cwiseAbs().maxCoeff(), 0.0);
}

TEST(DiscreteAttention, ContinuumLimit) {
  // A fine grid turns the discrete Jacobian into the continuous one:
  // J_r ~ Psi^T dp/df Phi, where sparsemax acts on h f (h-simplex scaling).
  const int l = 4096;
  const double lo = -6.0, hi = 6.0, h = (hi - lo) / l;
  sd::AttentionBasis b{{component(0.0, 0.3), component(0.5, 0.1), component(-0.8, 0.6)},
                       std::nullopt};
  for (double a : {1.0, 2.0}) {
    const auto s = score1d(a, 0.2, 0.5);
    const sd::Vector theta = s.canonical();
    std::vector<double> f(l);
    sd::Matrix phi(l, 2), psi(l, b.size());
    for (int i = 0; i < l; ++i) {
      const double t = lo + (i + 0.5) * h;
      phi(i, 0) = t;
      phi(i, 1) = t * t;
      f[i] = theta(0) * t + theta(1) * t * t;
      if (a == 2.0) f[i] *= h;
      const std::array<double, 1> pt{t};
      psi.row(i) = b.evaluate(pt).transpose();
    }
    const auto disc = sd::discrete_attention(f, sd::Alpha(a));
    const sd::Matrix jd = psi.transpose() * (a == 2.0 ? h : 1.0) * disc.jacobian * phi;
    const auto res = sd::attention(s, b);
    EXPECT_LT((psi.transpose() * disc.probs - res.r).cwiseAbs().maxCoeff(), 1e-3) << a;
    EXPECT_LT((jd - *res.jacobian).cwiseAbs().maxCoeff(), 1e-3) << a;
  }
}

TEST(ValueFunction, SelfRepresentation) {
  sd::AttentionBasis b;
  for (int j = 0; j < 6; ++j) b.components.push_back(component(-2.5 + j, 0.5));
  sd::Matrix loc(200, 1);
  for (int l = 0; l < 200; ++l) loc(l, 0) = -3.0 + 6.0 * l / 199.0;
  sd::Matrix f(b.size(), 200);
  for (int l = 0; l < 200; ++l) {
    const std::array<double, 1> t{loc(l, 0)};
    f.col(l) = b.evaluate(t);
  }
  const auto bmat = sd::fit_value_function(f, loc, b, 1e-10);
  EXPECT_LT((bmat - sd::Matrix::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(ValueFunction, ShrinkageAndNormalEquations) {
  std::mt19937_64 rng(157);
  std::normal_distribution<double> z;
  sd::AttentionBasis b;
  for (int j = 0; j < 10; ++j) b.components.push_back(component(-2.0 + 0.4 * j, 0.3));
  sd::Matrix loc(50, 1), h(3, 50);
  for (int l = 0; l < 50; ++l) loc(l, 0) = -3.0 + 6.0 * l / 49.0;
  for (int i = 0; i < 3; ++i)
    for (int l = 0; l < 50; ++l) h(i, l) = z(rng);
  sd::Matrix f(10, 50);
  for (int l = 0; l < 50; ++l) {
    const std::array<double, 1> t{loc(l, 0)};
    f.col(l) = b.evaluate(t);
  }
  const sd::Matrix oracle =
      h * f.transpose() *
      (f * f.transpose() + 0.1 * sd::Matrix::Identity(10, 10)).fullPivLu().inverse();
  EXPECT_LT((sd::fit_value_function(h, loc, b, 0.1) - oracle).cwiseAbs().maxCoeff(), 1e-10);
  double prev = std::numeric_limits<double>::infinity();
  for (double lam = 1e-3; lam <= 1e4; lam *= 10.0) {
    const double norm = sd::fit_value_function(h, loc, b, lam).norm();
    EXPECT_LT(norm, prev);
    prev = norm;
  }
  EXPECT_LT(prev, 1e-2);
  EXPECT_THROW(sd::fit_value_function(h, loc, b, 0.0), sd::Error);
}

TEST(Context, Product) {
  std::mt19937_64 rng(163);
  std::normal_distribution<double> z;
  sd::Matrix b(3, 5);
  sd::Vector r(5);
  for (int j = 0; j < 5; ++j) {
    r(j) = z(rng);
    for (int i = 0; i < 3; ++i) b(i, j) = z(rng);
  }
  const auto c = sd::context(b, r);
  for (int i = 0; i < 3; ++i) {
    double s = 0.0;
    for (int j = 0; j < 5; ++j) s += b(i, j) * r(j);
    EXPECT_EQ(c(i), s);
  }
  EXPECT_EQ(sd::context(sd::Matrix::Identity(5, 5), r), r);
  EXPECT_EQ(sd::context(b, sd::Vector::Zero(5)), sd::Vector::Zero(3));
  EXPECT_THROW(sd::context(b, sd::Vector::Zero(4)), sd::Error);
}
