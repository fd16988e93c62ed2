#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "marginal_evo/dynamics.hpp"
#include "marginal_evo/spectra.hpp"

using namespace marginal_evo;

namespace {

ConnectivityMatrix zero_matrix(int n) { return {Eigen::MatrixXd::Zero(n, n), 0.0, Ensemble::Ginibre, 0}; }

DynamicsParams params_for(int n) {
  DynamicsParams p;
  p.n_units = n;
  return p;
}

}  // namespace

TEST(Kernels, FreeFieldIsLorentzian) {
  for (double w : {0.0, 0.3, 1.0, 4.0}) {
    EXPECT_DOUBLE_EQ(x0(w, 1.0, 1.0, 0.0), 2.0 / (w * w + 1.0));
    EXPECT_DOUBLE_EQ(x0(w, 0.5, 2.0, 0.0), 4.0 / (w * w + 0.25));
    EXPECT_EQ(x1(w, 1.0, 1.0, 0.0), 0.0);
  }
}

TEST(Kernels, ReferencePoint) {
  EXPECT_DOUBLE_EQ(x0(0.0, 1.0, 1.0, 0.5), 4.0);
  EXPECT_DOUBLE_EQ(x1(0.0, 1.0, 1.0, 0.5), 2.0);
}

TEST(Kernels, HighFrequencyAsymptote) {
  const double w = 1e4;
  EXPECT_NEAR(x0(w, 1.0, 1.5, 0.8) * w * w / (2 * 1.5), 1.0, 1e-7);
}

TEST(Kernels, IdentityBetweenOrders) {
  for (double s : {0.2, 0.7, 1.1}) {
    for (double w = 0.5; w < 3; w += 0.25) {
      const double d = w * w + 1.0 - s;
      EXPECT_NEAR(x1(w, 1.0, 1.0, s), 0.5 * s * x0(w, 1.0, 1.0, s) / d, 1e-14 * x1(w, 1.0, 1.0, s));
    }
  }
}

TEST(Kernels, EvenAndDecreasingBelowGammaSquared) {
  for (double s : {0.0, 0.4, 0.9}) {
    double p0 = INFINITY, p1 = INFINITY;
    for (double w = 0.0; w <= 5.0; w += 0.05) {
      EXPECT_EQ(x0(w, 1.0, 1.0, s), x0(-w, 1.0, 1.0, s));
      EXPECT_EQ(x1(w, 1.0, 1.0, s), x1(-w, 1.0, 1.0, s));
      const double a = x0(w, 1.0, 1.0, s), b = x1(w, 1.0, 1.0, s);
      EXPECT_LT(a, p0);
      if (s > 0) {
        EXPECT_LT(b, p1);
      }
      p0 = a;
      p1 = b;
    }
  }
}

TEST(Kernels, PoleRaises) {
  EXPECT_THROW(x0(0.0, 1.0, 1.0, 1.0), PoleError);
  EXPECT_THROW(x1(0.5, 1.0, 1.0, 1.25), PoleError);
  EXPECT_NO_THROW(x0(0.5, 1.0, 1.0, 1.2));
}

TEST(Theory, WidthFactorAndReferenceValue) {
  const DynamicsParams p;
  EXPECT_EQ(finite_width_factor(p), 0.390625);
  EXPECT_DOUBLE_EQ(x_theory({0.0}, p, 0.5)[0], 4.78125);
}

TEST(Theory, InfiniteWidthLimit) {
  DynamicsParams p;
  p.n_units = 2000000000;
  const std::vector<double> grid{0.0, 0.5, 1.0, 1.5};
  const auto th = x_theory(grid, p, 0.6);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(th[i], x0(grid[i], 1, 1, 0.6), 1e-7 * th[i]);
}

TEST(Theory, CurvesSatisfyIdentityExactly) {
  DynamicsParams p;
  std::vector<double> grid;
  for (int i = 0; i < 40; ++i) grid.push_back(0.05 * i);
  for (double s : {0.0, 0.5, 0.95}) {
    const auto c = theory_curves(grid, p, s);
    ASSERT_EQ(c.x_th.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(c.x_th[i], c.x0[i] + c.correction_factor * c.x1[i]);
    EXPECT_EQ(c.x_th, x_theory(grid, p, s));
  }
}

TEST(RelMse, IdentityIsZero) {
  const std::vector<double> g{0.1, 0.5, 1.0, 1.5, 2.0}, t{5, 4, 3, 2, 1};
  EXPECT_EQ(relmse_band(t, t, g, 0.1, 2.0), 0.0);
}

TEST(RelMse, ConstantOffset) {
  const std::vector<double> g{0.1, 0.5, 1.0, 1.5, 2.0}, t{5, 4, 3, 2, 1};
  std::vector<double> s(t);
  for (double& v : s) v *= 1.1;
  EXPECT_NEAR(relmse_band(s, t, g, 0.1, 2.0), 0.01, 1e-15);
  EXPECT_NEAR(band_mean_relative_deviation(s, t, g, 0.1, 2.0), 0.1, 1e-15);
}

TEST(RelMse, SinglePerturbedPoint) {
  const std::vector<double> g{0.0, 0.1, 0.5, 1.0, 1.5, 2.0, 3.0}, t{9, 5, 4, 3, 2, 1, 0.5};
  std::vector<double> s(t);
  s[3] += 0.2 * t[3];
  const int m = 5;  // band points 0.1 .. 2.0 inclusive
  EXPECT_NEAR(relmse_band(s, t, g, 0.1, 2.0), 0.04 / m, 1e-15);
}

TEST(RelMse, Errors) {
  const std::vector<double> g{0.1, 0.5, 3.0}, t{1, 2, 3};
  EXPECT_THROW(relmse_band(t, t, g, 0.1, 2.0), EmptyBand);
  const std::vector<double> g2{0.1, 0.5, 1.0}, z{1, 0, 3};
  EXPECT_THROW(relmse_band(z, z, g2, 0.1, 2.0), ZeroTheory);
  EXPECT_THROW(relmse_band({1, 2}, t, g, 0.1, 2.0), DimensionMismatch);
}

TEST(Welch, GridAndShape) {
  const auto p = params_for(4);
  const auto s = simulate(p, zero_matrix(4), 1, p.burn_in);
  const auto est = estimate_psd(s, p, 8);
  EXPECT_EQ(est.segment_length, 333);
  EXPECT_EQ(est.segment_count, 8);
  EXPECT_EQ(est.series_count, 4);
  ASSERT_EQ(est.omega.size(), 167u);
  for (std::size_t m = 0; m < est.omega.size(); ++m) {
    EXPECT_DOUBLE_EQ(est.omega[m], 2 * M_PI * m / (333 * 0.05));
    EXPECT_GE(est.psd[m], 0.0);
  }
}

TEST(Welch, HannWindowIsPeriodic) {
  const auto w = hann_window(8);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[4], 1.0, 1e-15);
  EXPECT_NEAR(w[2], w[6], 1e-15);
}

TEST(Welch, OrnsteinUhlenbeckCalibration) {
  const auto p = params_for(256);
  std::vector<double> mean;
  std::vector<double> grid;
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const auto est = estimate_psd(simulate(p, zero_matrix(256), 40 + seed, p.burn_in), p);
    if (mean.empty()) {
      mean.assign(est.psd.size(), 0.0);
      grid = est.omega;
    }
    for (std::size_t m = 0; m < mean.size(); ++m) mean[m] += est.psd[m] / 8;
  }
  std::vector<double> lorentz(grid.size());
  for (std::size_t m = 0; m < grid.size(); ++m) lorentz[m] = 2.0 / (grid[m] * grid[m] + 1.0);
  EXPECT_LT(band_mean_relative_deviation(mean, lorentz, grid, 0.1, 2.0), 0.10);
}

TEST(Welch, WhiteNoiseIsFlat) {
  // gamma dt = 1 makes the propagator vanish: samples are i.i.d. N(0, 2 kappa dt)
  auto p = params_for(64);
  p.gamma = 1.0 / p.dt;
  const auto est = estimate_psd(simulate(p, zero_matrix(64), 2, p.burn_in), p);
  const double level = 2 * p.kappa * p.dt * p.dt;  // variance * dt
  double mean = 0;
  for (std::size_t m = 1; m + 1 < est.psd.size(); ++m) {
    // per-bin relative sd ~ 1/sqrt(64 units * 8 segments) ~ 0.044 before overlap correlation
    EXPECT_NEAR(est.psd[m] / level, 1.0, 0.25) << m;
    mean += est.psd[m];
  }
  mean /= static_cast<double>(est.psd.size() - 2);
  EXPECT_NEAR(mean / level, 1.0, 0.02);
}

TEST(Welch, ParsevalTotalPower) {
  const auto p = params_for(32);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto s = simulate(p, zero_matrix(32), seed, p.burn_in);
    const auto est = estimate_psd(s, p);
    const double ms = s.samples.array().square().mean();
    EXPECT_NEAR(psd_total_power(est, p.dt) / ms, 1.0, 0.05);
  }
}

TEST(Welch, DoublingSamplesHalvesVariance) {
  // fixed segment length: 1500 samples / 8 segments vs 3000 samples / 17 segments
  auto short_p = params_for(2);
  short_p.n_steps = 2000;
  auto long_p = short_p;
  long_p.n_steps = 3500;
  const auto var_of = [&](const DynamicsParams& p, int segments) {
    std::vector<std::vector<double>> runs;
    for (std::uint64_t seed = 0; seed < 64; ++seed) {
      runs.push_back(estimate_psd(simulate(p, zero_matrix(2), 700 + seed, p.burn_in), p, segments).psd);
    }
    double rel = 0;
    int bins = 0;
    for (std::size_t m = 2; m < 40; ++m) {
      double mu = 0, sq = 0;
      for (const auto& r : runs) mu += r[m];
      mu /= runs.size();
      for (const auto& r : runs) sq += (r[m] - mu) * (r[m] - mu);
      rel += sq / (runs.size() - 1) / (mu * mu);
      ++bins;
    }
    return rel / bins;
  };
  const double ratio = var_of(long_p, 17) / var_of(short_p, 8);
  EXPECT_GT(ratio, 0.35);
  EXPECT_LT(ratio, 0.7);
}

TEST(Welch, DeterministicAndChecked) {
  const auto p = params_for(4);
  const auto s = simulate(p, zero_matrix(4), 3, p.burn_in);
  EXPECT_EQ(estimate_psd(s, p).psd, estimate_psd(s, p).psd);
  EXPECT_THROW(welch_psd(Eigen::MatrixXd::Zero(20, 2), 0.05, 8), InsufficientData);
  EXPECT_THROW(estimate_psd(TrajectoryStats{}, p), InsufficientData);
  EXPECT_THROW(welch_psd(Eigen::MatrixXd::Zero(200, 2), 0.05, 0), InvalidParameter);
}
