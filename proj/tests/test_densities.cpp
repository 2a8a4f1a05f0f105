// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "sparsedist/densities.hpp"

namespace sd = sparsedist;

namespace {

double quad_1d(const sd::DensityParams& d, double lo, double hi,
               std::vector<double> kinks = {}) {
  sd::QuadratureOptions opt;
  opt.tol = 1e-12;
  return sd::integrate([&](double t) { return sd::pdf(d, t); }, {lo, hi}, kinks,
                       opt);
}

sd::SpdMatrix random_spd(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> z;
  sd::Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = z(rng);
  return sd::spd_decompose(g * g.transpose() / n +
                           0.3 * sd::Matrix::Identity(n, n));
}

sd::Matrix random_orthogonal(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> z;
  sd::Matrix g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = z(rng);
  Eigen::HouseholderQR<sd::Matrix> qr(g);
  return qr.householderQ();
}

}  // namespace

TEST(BetaGaussian, TruncatedParabolaNormalizer) {
  const auto p = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 1.0);
  EXPECT_NEAR(p.radius, std::cbrt(1.5), 1e-14);
  EXPECT_NEAR(p.tau, -0.5 * std::pow(1.5, 2.0 / 3.0), 1e-14);
  EXPECT_NEAR(p.tau, -0.65519, 1e-5);
  const std::array<double, 1> zero{0.0};
  EXPECT_NEAR(sd::beta_gaussian_pdf(p, zero), -p.tau, 1e-15);
}

TEST(BetaGaussian, GaussianLimit) {
  const auto p = sd::make_beta_gaussian(sd::Alpha(1.01), 0.0, 1.0);
  EXPECT_GT(p.radius, 10.0);
  for (double t = -3.0; t <= 3.0; t += 0.05) {
    const std::array<double, 1> pt{t};
    EXPECT_NEAR(sd::beta_gaussian_pdf(p, pt), sd::std_normal_pdf(t), 2e-2);
  }
  const auto q = sd::make_beta_gaussian(sd::Alpha(1.001), 0.0, 1.0);
  for (double t = -3.0; t <= 3.0; t += 0.05) {
    const std::array<double, 1> pt{t};
    EXPECT_NEAR(sd::beta_gaussian_pdf(q, pt), sd::std_normal_pdf(t), 2e-2);
  }
}

TEST(BetaGaussian, RejectsOutOfRangeAlpha) {
  try {
    sd::make_beta_gaussian(sd::Alpha(0.5), 0.0, 1.0);
    FAIL();
  } catch (const sd::Error& e) {
    EXPECT_EQ(e.code(), sd::Errc::unsupported);
  }
  EXPECT_THROW(sd::make_beta_gaussian(sd::Alpha(2.5), 0.0, 1.0), sd::Error);
}

TEST(BetaGaussian, OneDimensionalNormalization) {
  for (double a : {1.0, 1.1, 4.0 / 3.0, 1.5, 1.75, 2.0}) {
    for (double s2 : {0.25, 1.0, 3.0}) {
      const auto p = sd::make_beta_gaussian(sd::Alpha(a), 0.7, s2);
      const double z = sd::expect_beta_gaussian(
          p, [](std::span<const double>) { return 1.0; });
      EXPECT_NEAR(z, 1.0, 1e-9) << "alpha=" << a << " s2=" << s2;
    }
  }
}

TEST(BetaGaussian, TwoDimensionalNormalization) {
  const auto sigma = sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48});
  for (double a : {1.0, 4.0 / 3.0, 1.5, 2.0}) {
    const auto p = sd::make_beta_gaussian(sd::Alpha(a), sd::Vector{{0.3, -1.0}},
                                          sigma);
    const double z = sd::expect_beta_gaussian(
        p, [](std::span<const double>) { return 1.0; });
    EXPECT_NEAR(z, 1.0, 1e-5) << a;
  }
}

TEST(TruncatedParaboloid, MatchesBetaGaussian) {
  const auto one = sd::make_truncated_paraboloid(sd::Vector::Zero(1),
                                                 sd::SpdMatrix::scalar(1.0));
  EXPECT_NEAR(sd::density_tau(one), -0.5 * std::pow(1.5, 2.0 / 3.0), 1e-14);

  const auto two = sd::make_truncated_paraboloid(sd::Vector::Zero(2),
                                                 sd::SpdMatrix::identity(2));
  EXPECT_NEAR(sd::density_tau(two), -std::sqrt(1.0 / std::numbers::pi), 1e-14);
  const double z = sd::expect_beta_gaussian(
      two.as<sd::BetaGaussianParams>(),
      [](std::span<const double>) { return 1.0; });
  EXPECT_NEAR(z, 1.0, 1e-6);

  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 4;
    const auto s = random_spd(rng, n);
    const sd::Vector mu = sd::Vector::Random(n);
    const auto para = sd::make_truncated_paraboloid(mu, s);
    const auto bg = sd::make_beta_gaussian(sd::Alpha(2.0), mu, s);
    const auto& pr = para.as<sd::BetaGaussianParams>();
    EXPECT_NEAR(pr.tau, bg.tau, 1e-12 * std::abs(bg.tau));
    EXPECT_NEAR(pr.radius, bg.radius, 1e-12 * bg.radius);
  }
}

TEST(TruncatedParaboloid, FigureCovarianceNormalizes) {
  const auto s = sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48});
  const auto d = sd::make_truncated_paraboloid(sd::Vector::Zero(2), s);
  // tau = -(Gamma(3) / sqrt(det(2 pi Sigma)))^{1/2}
  const double expect =
      -std::sqrt(2.0 / std::sqrt(4.0 * std::numbers::pi * std::numbers::pi * 0.128));
  EXPECT_NEAR(sd::density_tau(d), expect, 1e-13);
  const double z = sd::expect_beta_gaussian(
      d.as<sd::BetaGaussianParams>(),
      [](std::span<const double>) { return 1.0; });
  EXPECT_NEAR(z, 1.0, 1e-6);
}

TEST(Pdf, Examples) {
  const auto tri = sd::wrap(sd::make_triangular(0.0, 1.0));
  EXPECT_DOUBLE_EQ(sd::pdf(tri, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(sd::pdf(tri, 1.0), 0.0);
  EXPECT_NEAR(quad_1d(tri, -1.0, 1.0, {0.0}), 1.0, 1e-12);

  const auto bg = sd::make_beta_gaussian(sd::Alpha(1.5), sd::Vector{{0.0, 0.0}},
                                         sd::SpdMatrix::identity(2));
  const std::array<double, 2> far{bg.radius * 1.01, 0.0};
  EXPECT_EQ(sd::beta_gaussian_pdf(bg, far), 0.0);
}

TEST(LocationScale, TriangularKernel) {
  const auto ls = sd::make_location_scale(sd::ScaleKernel::quadratic(), 0.0, 1.0);
  EXPECT_NEAR(ls.a, 1.0, 1e-14);
  EXPECT_NEAR(ls.tau, -1.0, 1e-14);
  for (double b : {0.1, 0.5, 2.0, 7.0}) {
    const auto gen = sd::make_location_scale(sd::ScaleKernel::quadratic(), 0.3,
                                             std::sqrt(b));
    // Location-scale with g = t^2/2 and scale sqrt(b): f = -|t|/b.
    EXPECT_NEAR(gen.tau, sd::make_triangular(0.3, b).tau, 1e-12);
  }
}

TEST(LocationScale, CubicKernel) {
  const auto ls = sd::make_location_scale(sd::ScaleKernel::cubic(), 0.0, 1.0);
  EXPECT_NEAR(ls.a, std::cbrt(1.5), 1e-14);
  EXPECT_NEAR(ls.a * ls.a * ls.a / 3.0, 0.5, 1e-14);
  EXPECT_NEAR(ls.tau, -0.5 * std::pow(1.5, 2.0 / 3.0), 1e-14);
}

TEST(LocationScale, NoRootForWeakKernel) {
  // g linear: a g' - g + g(0) = 0 never reaches 1/2.
  sd::ScaleKernel lin{"custom", 1.0, [](double t) { return t; },
                      [](double) { return 1.0; }};
  EXPECT_THROW(sd::make_location_scale(lin, 0.0, 1.0), sd::Error);
}

TEST(TruncatedGaussian, KappaTwo) {
  const auto tg = sd::make_truncated_gaussian(2.0, 0.0, 1.0);
  const double a = tg.a;
  // The defining equation.
  EXPECT_NEAR(0.5 + 2.0 * a / std::sqrt(2.0 * std::numbers::pi) *
                        std::exp(-a * a / 2.0),
              std::erf(a / std::numbers::sqrt2), 1e-13);
  const auto d = sd::wrap(tg);
  EXPECT_NEAR(quad_1d(d, -a, a, {0.0}), 1.0, 1e-10);
  const auto ls = sd::make_location_scale(sd::ScaleKernel::gaussian(2.0), 0.0,
                                          1.0);
  EXPECT_NEAR(ls.a, a, 1e-10);
  EXPECT_NEAR(ls.tau, tg.tau, 1e-12);
}

TEST(TruncatedGaussian, EdgeCases) {
  const auto full = sd::make_truncated_gaussian(1.0, 0.0, 1.0);
  EXPECT_TRUE(std::isinf(full.a));
  EXPECT_EQ(full.tau, 0.0);
  EXPECT_THROW(sd::make_truncated_gaussian(0.9, 0.0, 1.0), sd::Error);
  const auto near_one = sd::make_truncated_gaussian(1.0 + 1e-6, 0.0, 1.0);
  EXPECT_GT(near_one.a, 4.0);
  EXPECT_NEAR(quad_1d(sd::wrap(near_one), -near_one.a, near_one.a, {0.0}), 1.0,
              1e-9);
}

TEST(IntegerFamilies, IntegerGaussianThree) {
  const auto p = sd::make_sparse_integer_gaussian(3.0);
  EXPECT_EQ(p.t_min, 2);
  EXPECT_EQ(p.t_max, 4);
  EXPECT_NEAR(p.mass(3), 2.0 / 3.0, 1e-15);
  EXPECT_EQ(p.mass(2), p.mass(4));
  double sum = 0.0, mean = 0.0;
  for (std::int64_t t = p.t_min; t <= p.t_max; ++t) {
    sum += p.mass(t);
    mean += t * p.mass(t);
  }
  EXPECT_NEAR(sum, 1.0, 1e-15);
  EXPECT_NEAR(mean, 3.0, 1e-15);
}

TEST(IntegerFamilies, PoissonMatchesBruteForceWindow) {
  for (double mu : {0.3, 1.0, 2.5, 7.0, 30.0}) {
    const auto p = sd::make_sparse_poisson(mu);
    std::vector<double> f;
    for (int t = 0; t <= 50 + static_cast<int>(2 * mu); ++t) {
      f.push_back(t * std::log(mu) - std::lgamma(t + 1.0));
    }
    const double tau = sd::entmax_threshold(f, sd::Alpha(2.0));
    EXPECT_NEAR(p.tau, tau, 1e-12) << mu;
    double sum = 0.0;
    for (double q : p.pmf) sum += q;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    for (std::size_t t = 0; t < f.size(); ++t) {
      EXPECT_NEAR(p.mass(static_cast<std::int64_t>(t)), std::max(0.0, f[t] - tau),
                  1e-12);
    }
  }
  const auto one = sd::make_sparse_poisson(1.0);
  EXPECT_NEAR(one.mass(0), 0.5, 1e-15);
  EXPECT_NEAR(one.mass(1), 0.5, 1e-15);
}

TEST(IntegerFamilies, WideWindows) {
  // A flat score forces several doublings.
  const auto p = sd::make_sparse_integer_gaussian(1234.4);
  double sum = 0.0;
  for (double q : p.pmf) sum += q;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_GE(p.t_min, 1230);
  EXPECT_THROW(sd::make_sparse_poisson(-1.0), sd::Error);
}

TEST(MeanVariance, Epanechnikov) {
  const auto p = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 2.0 / 3.0);
  const auto [m, v] = sd::mean_variance(p);
  EXPECT_NEAR(v(0, 0), 0.2, 1e-14);
  const double q = sd::expect_beta_gaussian(
      p, [](std::span<const double> t) { return t[0] * t[0]; });
  EXPECT_NEAR(q, 0.2, 1e-10);
}

TEST(MeanVariance, GaussianAndElegantFormula) {
  const auto s = sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48});
  const auto g = sd::make_beta_gaussian(sd::Alpha(1.0), sd::Vector::Zero(2), s);
  EXPECT_TRUE(sd::mean_variance(g).second.isApprox(s.matrix(), 1e-15));

  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> ua(1.05, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial % 3;
    const double a = ua(rng);
    const auto sig = random_spd(rng, n);
    const auto p = sd::make_beta_gaussian(sd::Alpha(a), sd::Vector::Zero(n), sig);
    const auto v = sd::mean_variance(p).second;
    const double omega = sd::beta_gaussian_negentropy(p);
    const sd::Matrix expect = (1.0 / a + (a - 1.0) * omega) * sig.matrix();
    EXPECT_LT((v - expect).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(MeanVariance, TwoDimensionalQuadrature) {
  const auto s = sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48});
  const auto p = sd::make_beta_gaussian(sd::Alpha(1.5), sd::Vector{{1.0, 2.0}}, s);
  const auto v = sd::mean_variance(p).second;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double c = sd::expect_beta_gaussian(p, [&](std::span<const double> t) {
        return (t[i] - p.mu(i)) * (t[j] - p.mu(j));
      });
      EXPECT_NEAR(c, v(i, j), 1e-6);
    }
  }
}

TEST(Negentropy, ClosedForms) {
  const auto tri = sd::wrap(sd::make_triangular(0.0, 1.0));
  EXPECT_NEAR(sd::tsallis_negentropy(tri), -1.0 / 6.0, 1e-15);
  const auto para = sd::wrap(sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 1.0));
  EXPECT_NEAR(sd::tsallis_negentropy(para),
              -0.5 + 0.2 * std::pow(1.5, 2.0 / 3.0), 1e-14);
  // Triangular closed form vs quadrature of (int p^2 - 1)/2.
  const auto t3 = sd::make_triangular(0.0, 3.0);
  const double sq = quad_1d(sd::wrap(t3), -std::sqrt(3.0), std::sqrt(3.0), {0.0});
  (void)sq;
  const double p2 = sd::integrate(
      [&](double t) {
        const double v = sd::pdf(sd::wrap(t3), t);
        return v * v;
      },
      {-std::sqrt(3.0), std::sqrt(3.0)}, std::array<double, 1>{0.0});
  EXPECT_NEAR(sd::tsallis_negentropy(sd::wrap(t3)), 0.5 * (p2 - 1.0), 1e-12);
}

TEST(Negentropy, BetaGaussianQuadrature) {
  for (double a : {1.25, 4.0 / 3.0, 1.5, 2.0}) {
    const auto p = sd::make_beta_gaussian(sd::Alpha(a), 0.2, 0.8);
    const double ipa = sd::expect_beta_gaussian(
        p, [&](std::span<const double> t) {
          return std::pow(sd::beta_gaussian_pdf(p, t), a - 1.0);
        });
    EXPECT_NEAR(sd::beta_gaussian_negentropy(p), (ipa - 1.0) / (a * (a - 1.0)),
                1e-8);
  }
}

TEST(Wasserstein, Examples) {
  const auto p = sd::make_beta_gaussian(sd::Alpha(1.5), 0.0, 1.0);
  EXPECT_NEAR(sd::wasserstein2(p, p), 0.0, 1e-14);
  const auto q = sd::make_beta_gaussian(sd::Alpha(1.5), 1.0, 1.0);
  EXPECT_NEAR(sd::wasserstein2(p, q), 1.0, 1e-14);
  const auto g1 = sd::make_beta_gaussian(sd::Alpha(1.0), 0.0, 1.0);
  const auto g2 = sd::make_beta_gaussian(sd::Alpha(1.0), 0.0, 4.0);
  EXPECT_NEAR(sd::wasserstein2(g1, g2), 1.0, 1e-14);
  const auto r = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 1.0);
  EXPECT_THROW(sd::wasserstein2(p, r), sd::Error);
}

TEST(Wasserstein, OneDimensionalQuantileOracle) {
  // In 1-d, W2^2 of a location-scale pair is (dmu)^2 + (s1 - s2)^2 Var_std.
  const auto p = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 1.0);
  const auto q = sd::make_beta_gaussian(sd::Alpha(2.0), 0.5, 4.0);
  const double sd1 = std::sqrt(sd::mean_variance(p).second(0, 0));
  const double sd2 = std::sqrt(sd::mean_variance(q).second(0, 0));
  EXPECT_NEAR(sd::wasserstein2(p, q), 0.25 + (sd1 - sd2) * (sd1 - sd2), 1e-12);
}

TEST(Support, ExactnessOnRandomPoints) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> u(-4.0, 4.0);
  std::vector<sd::DensityParams> fams{
      sd::wrap(sd::make_beta_gaussian(sd::Alpha(1.5), 0.3, 2.0)),
      sd::wrap(sd::make_beta_gaussian(
          sd::Alpha(2.0), sd::Vector{{0.1, 0.2}},
          sd::SpdMatrix::from_rows(2, {0.6, 0.4, 0.4, 0.48}))),
      sd::make_truncated_paraboloid(sd::Vector{{0.0, 0.0}},
                                    sd::SpdMatrix::from_rows(2, {2.0, 0.3, 0.3, 1.0})),
      sd::wrap(sd::make_triangular(0.5, 2.0)),
      sd::wrap(sd::make_truncated_gaussian(3.0, -0.2, 1.5)),
      sd::wrap(sd::make_location_scale(sd::ScaleKernel::cubic(), 1.0, 0.7)),
  };
  for (const auto& d : fams) {
    const auto s = sd::support(d);
    const int n = sd::density_dim(d);
    for (int i = 0; i < 10000; ++i) {
      std::array<double, 2> pt{u(rng), u(rng)};
      const std::span<const double> t(pt.data(), static_cast<std::size_t>(n));
      EXPECT_EQ(sd::pdf(d, t) > 0.0, sd::support_contains(s, t))
          << sd::family_name(d.family);
    }
  }
  const auto pois = sd::wrap(sd::make_sparse_poisson(4.0));
  const auto ps = sd::support(pois);
  for (int t = -3; t < 30; ++t) {
    const double x = t;
    EXPECT_EQ(sd::pdf(pois, x) > 0.0,
              sd::support_contains(ps, std::span<const double>(&x, 1)));
  }
}

TEST(Equivariance, TranslationAndRotation) {
  std::mt19937_64 rng(53);
  std::normal_distribution<double> z;
  for (double a : {1.0, 1.5, 2.0}) {
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 2 + trial % 2;
      const auto sig = random_spd(rng, n);
      sd::Vector mu(n), b(n), t(n);
      for (int i = 0; i < n; ++i) {
        mu(i) = z(rng);
        b(i) = z(rng);
        t(i) = mu(i) + 0.3 * z(rng);
      }
      const sd::Matrix u = random_orthogonal(rng, n);
      const auto p = sd::make_beta_gaussian(sd::Alpha(a), mu, sig);
      const auto q = sd::make_beta_gaussian(
          sd::Alpha(a), u * mu + b,
          sd::spd_decompose(u * sig.matrix() * u.transpose()));
      const sd::Vector ut = u * t + b;
      EXPECT_NEAR(sd::beta_gaussian_pdf(q, {ut.data(), static_cast<std::size_t>(n)}),
                  sd::beta_gaussian_pdf(p, {t.data(), static_cast<std::size_t>(n)}),
                  1e-12);
    }
  }
}

TEST(Finite, WrapsEntmax) {
  const auto f = sd::wrap(sd::make_finite({1.0, 0.2, -3.0}, sd::Alpha(2.0)));
  EXPECT_NEAR(sd::pdf(f, 0.0) + sd::pdf(f, 1.0) + sd::pdf(f, 2.0), 1.0, 1e-15);
  EXPECT_EQ(sd::pdf(f, 2.0), 0.0);
  EXPECT_EQ(sd::pdf(f, 0.5), 0.0);
}
