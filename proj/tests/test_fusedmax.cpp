// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "sparsedist/densities.hpp"
#include "sparsedist/fusedmax.hpp"

namespace sd = sparsedist;

namespace {

// TV denoising through its dual: u = y - D^T z with |z_i| <= lambda,
// minimizing 1/2 ||y - D^T z||^2 by accelerated projected gradient.
std::vector<double> tv_dual_oracle(const std::vector<double>& y, double lambda,
                                   int iterations = 200000) {
  const std::size_t n = y.size();
  std::vector<double> z(n - 1, 0.0), zprev = z, w = z, u(n);
  const auto primal = [&](const std::vector<double>& zz) {
    for (std::size_t i = 0; i < n; ++i) {
      double dz = 0.0;
      if (i > 0) dz += zz[i - 1];
      if (i + 1 < n) dz -= zz[i];
      u[i] = y[i] - dz;
    }
  };
  for (int it = 0; it < iterations; ++it) {
    primal(w);
    zprev = z;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      // gradient of the dual objective w.r.t. z_i is -(u_{i+1} - u_i)
      z[i] = std::clamp(w[i] + 0.25 * (u[i + 1] - u[i]), -lambda, lambda);
    }
    const double m = static_cast<double>(it) / (it + 3.0);
    for (std::size_t i = 0; i + 1 < n; ++i) w[i] = z[i] + m * (z[i] - zprev[i]);
  }
  primal(z);
  return u;
}

double total_variation(const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 1; i < v.size(); ++i) s += std::abs(v[i] - v[i - 1]);
  return s;
}

double mass(const std::function<double(double)>& p, double b) {
  return sd::integrate(p, {-b, b}, std::array<double, 1>{0.0}, {.tol = 1e-13});
}

}  // namespace

TEST(Rof, CappedParabolaExample) {
  const auto s = sd::EvenScore::parabola(1.0);
  const auto closed = sd::rof_fusedmax_closed(s, 1.0);
  EXPECT_NEAR(closed.a, std::cbrt(3.0), 1e-15);
  EXPECT_NEAR(closed.b, std::cbrt(4.5), 1e-15);
  EXPECT_NEAR(closed.tau, -0.5 * std::pow(4.5, 2.0 / 3.0), 1e-15);
  const auto generic = sd::rof_fusedmax(s, 1.0);
  EXPECT_NEAR(generic.a, closed.a, 1e-10);
  EXPECT_NEAR(generic.b, closed.b, 1e-10);
  EXPECT_NEAR(generic.tau, closed.tau, 1e-10);
}

TEST(Rof, CappedTriangularExample) {
  const auto s = sd::EvenScore::abs(1.0);
  const auto closed = sd::rof_fusedmax_closed(s, 1.0);
  EXPECT_NEAR(closed.a, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(closed.b, std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(closed.tau, -std::sqrt(3.0), 1e-15);
  const auto generic = sd::rof_fusedmax(s, 1.0);
  EXPECT_NEAR(generic.a, closed.a, 1e-10);
  EXPECT_NEAR(generic.b, closed.b, 1e-10);
}

TEST(Rof, ClosedFormsMatchGenericGrid) {
  for (double sigma : {0.3, 1.0, 2.5}) {
    for (double gamma : {0.0, 0.1, 0.5, 2.0}) {
      for (auto s : {sd::EvenScore::parabola(sigma), sd::EvenScore::abs(sigma)}) {
        const auto c = sd::rof_fusedmax_closed(s, gamma);
        const auto g = sd::rof_fusedmax(s, gamma);
        EXPECT_NEAR(g.a, c.a, 1e-10);
        EXPECT_NEAR(g.b, c.b, 1e-10);
        EXPECT_NEAR(g.tau, c.tau, 1e-10);
        // the generic path also works from a quadrature antiderivative
        sd::EvenScore bare{sd::ScoreShape::custom, sigma, s.f, {}};
        EXPECT_NEAR(sd::rof_fusedmax(bare, gamma).b, c.b, 1e-9);
      }
    }
  }
}

TEST(Rof, DensityProperties) {
  for (auto s : {sd::EvenScore::parabola(0.8), sd::EvenScore::abs(1.3)}) {
    for (double gamma : {0.0, 0.3, 1.5}) {
      const auto p = sd::rof_fusedmax_closed(s, gamma);
      const std::function<double(double)> pdf = [&](double t) { return p.pdf(t); };
      EXPECT_NEAR(sd::integrate(pdf, {-p.b, p.b},
                                std::array<double, 3>{-p.a, 0.0, p.a}, {.tol = 1e-13}),
                  1.0, 1e-9);
      EXPECT_LT(std::abs(p.pdf(std::nextafter(p.a, 0.0)) - p.pdf(p.a)), 1e-12);
      EXPECT_EQ(p.pdf(p.b), 0.0);
      EXPECT_EQ(p.pdf(-p.b), 0.0);
      EXPECT_EQ(p.pdf(0.37), p.pdf(-0.37));
    }
  }
}

TEST(Rof, ZeroGammaIsUnsmoothed) {
  const auto par = sd::rof_fusedmax_closed(sd::EvenScore::parabola(0.7), 0.0);
  const auto tp = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 0.49);
  EXPECT_EQ(par.a, 0.0);
  EXPECT_NEAR(par.tau, tp.tau, 1e-14);
  for (double t = -1.5; t <= 1.5; t += 0.1) {
    EXPECT_NEAR(par.pdf(t), sd::pdf(sd::wrap(tp), t), 1e-14);
  }
  const auto tri = sd::rof_fusedmax_closed(sd::EvenScore::abs(1.7), 0.0);
  const auto ref = sd::make_triangular(0.0, 1.7);
  EXPECT_NEAR(tri.tau, ref.tau, 1e-14);
  for (double t = -2.0; t <= 2.0; t += 0.1) {
    EXPECT_NEAR(tri.pdf(t), sd::pdf(sd::wrap(ref), t), 1e-14);
  }
}

TEST(Rof, PlateauGrowsAndTvShrinks) {
  for (auto s : {sd::EvenScore::parabola(1.0), sd::EvenScore::abs(1.0)}) {
    double prev_a = -1.0;
    const auto p0 = sd::rof_fusedmax_closed(s, 0.0);
    // TV of an even unimodal density is twice its peak height
    const double tv0 = 2.0 * p0.plateau;
    for (int k = 0; k <= 20; ++k) {
      const auto p = sd::rof_fusedmax(s, 0.1 * k);
      EXPECT_GE(p.a, prev_a);
      prev_a = p.a;
      EXPECT_LE(2.0 * p.plateau, tv0 + 1e-12);
    }
  }
}

TEST(Rof, RejectsFlatScores) {
  sd::EvenScore flat{sd::ScoreShape::custom, 1.0,
                     [](double t) { return std::abs(t) < 0.5 ? 0.0 : -(std::abs(t) - 0.5); },
                     {}};
  EXPECT_THROW(sd::rof_fusedmax(flat, 0.5), sd::Error);
  EXPECT_THROW(sd::rof_fusedmax(sd::EvenScore::abs(1.0), -1.0), sd::Error);
}

TEST(TautString, MatchesDualOracle) {
  std::mt19937_64 rng(173);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5 + trial * 7;
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i) y[i] = std::sin(0.3 * i) + 0.5 * z(rng);
    for (double lambda : {0.05, 0.3, 2.0}) {
      const auto fast = sd::tv_denoise(y, lambda);
      const auto ref = tv_dual_oracle(y, lambda);
      for (int i = 0; i < n; ++i) EXPECT_NEAR(fast[i], ref[i], 1e-7) << trial;
    }
  }
  const std::vector<double> one{3.0};
  EXPECT_EQ(sd::tv_denoise(one, 1.0)[0], 3.0);
  const std::vector<double> big{0.0, 1.0, 5.0};
  // huge lambda collapses to the mean
  for (double v : sd::tv_denoise(big, 100.0)) EXPECT_NEAR(v, 2.0, 1e-14);
}

TEST(DiscreteFusedmax, Reductions) {
  const std::vector<double> f{0.3, -0.1, 0.8, 0.2, 0.0};
  const double h = 0.5;
  const auto p0 = sd::discrete_fusedmax(f, 0.0, h);
  const double tau = sd::detail::sparsemax_threshold(f, 1.0 / h);
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    EXPECT_NEAR(p0[i], std::max(f[i] - tau, 0.0), 1e-15);
    sum += p0[i];
  }
  EXPECT_NEAR(sum, 1.0 / h, 1e-12);
  const std::vector<double> flat(7, -2.0);
  for (double v : sd::discrete_fusedmax(flat, 0.7, 0.1)) EXPECT_NEAR(v, 1.0 / 0.7, 1e-12);
}

TEST(DiscreteFusedmax, ConvergesToContinuous) {
  const auto cont = sd::rof_fusedmax_closed(sd::EvenScore::parabola(1.0), 1.0);
  double prev = std::numeric_limits<double>::infinity();
  for (double h = 0.1; h > 1e-3; h *= 0.5) {
    const int n = static_cast<int>(std::lround(6.0 / h));
    std::vector<double> f(n);
    for (int i = 0; i < n; ++i) {
      const double t = -3.0 + (i + 0.5) * h;
      f[i] = -0.5 * t * t;
    }
    const auto p = sd::discrete_fusedmax(f, 1.0, h);
    double err = 0.0;
    for (int i = 0; i < n; ++i) err = std::max(err, std::abs(p[i] - cont.pdf(-3.0 + (i + 0.5) * h)));
    EXPECT_LT(err, prev) << h;
    prev = err;
  }
  const double h = 1e-3;
  const int n = 6000;
  std::vector<double> f(n);
  for (int i = 0; i < n; ++i) {
    const double t = -3.0 + (i + 0.5) * h;
    f[i] = -0.5 * t * t;
  }
  const auto p = sd::discrete_fusedmax(f, 1.0, h);
  double err = 0.0;
  for (int i = 0; i < n; ++i) err = std::max(err, std::abs(p[i] - cont.pdf(-3.0 + (i + 0.5) * h)));
  EXPECT_LT(err, 1e-2);
  EXPECT_LE(total_variation(p), total_variation(sd::discrete_fusedmax(f, 0.0, h)));
}

TEST(Sobolev, SmoothParabolaRoot) {
  const auto p = sd::sobolev_smooth(sd::EvenScore::parabola(1.0), 1.0);
  EXPECT_NEAR(p.b, 1.98, 0.01);
  // 2b(1 - b coth b + b^2 / 3) = 1 at sigma = gamma = 1
  EXPECT_NEAR(2.0 * p.b * (1.0 - p.b / std::tanh(p.b) + p.b * p.b / 3.0), 1.0, 1e-12);
  EXPECT_NEAR(p.C, p.b / std::sinh(p.b), 1e-14);
}

TEST(Sobolev, NormalizationAndBoundary) {
  for (auto shape : {sd::ScoreShape::parabola, sd::ScoreShape::abs}) {
    for (double sigma : {0.5, 1.0, 2.0}) {
      for (double gamma : {1e-3, 0.1, 1.0, 10.0}) {
        const auto s = shape == sd::ScoreShape::parabola ? sd::EvenScore::parabola(sigma)
                                                         : sd::EvenScore::abs(sigma);
        const auto p = sd::sobolev_smooth(s, gamma);
        EXPECT_NEAR(mass([&](double t) { return p.pdf(t); }, p.b), 1.0, 1e-8)
            << sigma << " " << gamma;
        const auto raw = [&](double t) { return p.cosh_term(t) - p.particular(t) - p.tau; };
        EXPECT_NEAR(raw(p.b), 0.0, 1e-12);
        const double d = 1e-4 * p.b;
        const double slope = (-raw(p.b + 2 * d) + 8 * raw(p.b + d) - 8 * raw(p.b - d) +
                              raw(p.b - 2 * d)) / (12.0 * d);
        EXPECT_NEAR(slope, 0.0, 1e-8);
        EXPECT_GE(raw(0.0), 0.0);
        EXPECT_EQ(p.pdf(0.3), p.pdf(-0.3));
      }
    }
  }
}

TEST(Sobolev, TriangularMassMatchesQuadrature) {
  // The mass equation is checked against direct integration of the
  // unnormalized profile for several trial half-widths.
  const double sigma = 1.3, gamma = 0.4, beta = 1.0 / std::sqrt(gamma);
  for (double b : {0.5, 1.0, 2.0, 4.0}) {
    const double c = (1.0 - std::exp(-beta * b)) / (sigma * beta * std::sinh(beta * b));
    const auto f = [&](double t) {
      return c * std::cosh(beta * t) - std::abs(t) / sigma - std::exp(-beta * std::abs(t)) / (beta * sigma);
    };
    const double tau = f(b);
    const double q = mass([&](double t) { return f(t) - tau; }, b);
    EXPECT_NEAR(sd::detail::sobolev_mass(sd::ScoreShape::abs, sigma, beta, b), q, 1e-10) << b;
  }
}

TEST(Sobolev, SmallGammaApproachesTruncatedParabola) {
  const auto p = sd::sobolev_smooth(sd::EvenScore::parabola(1.0), 1e-6);
  const auto tp = sd::make_beta_gaussian(sd::Alpha(2.0), 0.0, 1.0);
  double err = 0.0;
  for (double t = -2.0; t <= 2.0; t += 1e-3) err = std::max(err, std::abs(p.pdf(t) - sd::pdf(sd::wrap(tp), t)));
  EXPECT_LT(err, 5e-2);
  EXPECT_THROW(sd::sobolev_smooth(sd::EvenScore::abs(1.0), 0.0), sd::Error);
}
