#pragma once

// Simulated power spectral density (Welch) and the theoretical linear-sector
// kernels
//
//   c(w)  = 2 kappa / (w^2 + gamma^2)
//   X0(w) = c(w) (w^2 + gamma^2) / (w^2 + gamma^2 - s)
//   X1(w) = (s / 2) c(w) (w^2 + gamma^2) / (w^2 + gamma^2 - s)^2
//   Xth   = X0 + (gamma T / N) X1
//
// with s = sigma_w^2. Spectra use the two-sided angular-frequency density
// convention S(w) = int C(tau) exp(-i w tau) dtau, under which the
// Ornstein-Uhlenbeck process has S(w) = 2 kappa / (w^2 + gamma^2).

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <vector>

#include <fftw3.h>

#include "marginal_evo/config.hpp"
#include "marginal_evo/dynamics.hpp"
#include "marginal_evo/errors.hpp"

namespace marginal_evo {

namespace detail {

inline double pole_denominator(double omega, double gamma, double sigma_w2) {
  const double base = omega * omega + gamma * gamma;
  const double d = base - sigma_w2;
  const double guard = 64.0 * std::numeric_limits<double>::epsilon() * (base + std::abs(sigma_w2));
  if (!(std::abs(d) > guard)) {
    throw PoleError("kernel pole at omega = " + std::to_string(omega) + ", sigma_w2 = " + std::to_string(sigma_w2));
  }
  return d;
}

}  // namespace detail

/// Ornstein-Uhlenbeck factor c(w) = 2 kappa / (w^2 + gamma^2).
inline double ou_kernel(double omega, double gamma, double kappa) {
  return 2.0 * kappa / (omega * omega + gamma * gamma);
}

inline double x0(double omega, double gamma, double kappa, double sigma_w2) {
  const double d = detail::pole_denominator(omega, gamma, sigma_w2);
  return ou_kernel(omega, gamma, kappa) * (omega * omega + gamma * gamma) / d;
}

inline double x1(double omega, double gamma, double kappa, double sigma_w2) {
  const double d = detail::pole_denominator(omega, gamma, sigma_w2);
  return 0.5 * sigma_w2 * ou_kernel(omega, gamma, kappa) * (omega * omega + gamma * gamma) / (d * d);
}

/// Theoretical curves on a frequency grid.
struct SpectrumPair {
  std::vector<double> omega;
  std::vector<double> x_sim;
  std::vector<double> x0;
  std::vector<double> x1;
  std::vector<double> x_th;
  int n_seeds_averaged = 0;
  double correction_factor = 0.0;  ///< gamma T / N
};

/// Finite-width prefactor gamma T / N with T = n_steps dt.
inline double finite_width_factor(const DynamicsParams& params) { return params.gamma * params.width_ratio(); }

inline std::vector<double> x_theory(const std::vector<double>& grid, const DynamicsParams& params,
                                    double sigma_w2) {
  const double factor = finite_width_factor(params);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out[i] = x0(grid[i], params.gamma, params.kappa, sigma_w2) +
             factor * x1(grid[i], params.gamma, params.kappa, sigma_w2);
  }
  return out;
}

/// Fills omega, x0, x1 and x_th on `grid`; x_th is assembled from the stored
/// x0 and x1 so the identity x_th = x0 + factor * x1 holds bit for bit.
inline SpectrumPair theory_curves(const std::vector<double>& grid, const DynamicsParams& params,
                                  double sigma_w2) {
  SpectrumPair p;
  p.omega = grid;
  p.correction_factor = finite_width_factor(params);
  p.x0.resize(grid.size());
  p.x1.resize(grid.size());
  p.x_th.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    p.x0[i] = x0(grid[i], params.gamma, params.kappa, sigma_w2);
    p.x1[i] = x1(grid[i], params.gamma, params.kappa, sigma_w2);
    p.x_th[i] = p.x0[i] + p.correction_factor * p.x1[i];
  }
  return p;
}

// ---------------------------------------------------------------------------
// Welch estimator

struct PsdEstimate {
  std::vector<double> omega;  ///< omega_m = 2 pi m / (segment dt), m = 0 .. segment/2
  std::vector<double> psd;
  int segment_length = 0;
  int segment_count = 0;
  int series_count = 0;  ///< unit time series averaged
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  ~FftwPlan() {
    if (plan) {
      std::lock_guard lock(fftw_planner_mutex());
      fftw_destroy_plan(plan);
    }
  }
};

template <typename T>
struct FftwBuffer {
  T* data;
  explicit FftwBuffer(std::size_t n) : data(static_cast<T*>(fftw_malloc(sizeof(T) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
};

}  // namespace detail

/// Welch segment length for `segments` half-overlapping segments over n samples.
inline int welch_segment_length(int n_samples, int segments) { return (2 * n_samples) / (segments + 1); }

/// Periodic Hann window w_k = (1 - cos(2 pi k / n)) / 2.
inline std::vector<double> hann_window(int n) {
  std::vector<double> w(n);
  for (int k = 0; k < n; ++k) w[k] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * k / n);
  return w;
}

/// Averaged Hann-windowed periodogram of every column of `series` (time along
/// rows), sampled at spacing dt. Each segment contributes
/// dt / sum(w^2) * |sum_k w_k x_k e^{-i omega k dt}|^2. No detrending is
/// applied; the simulated process has zero mean.
inline PsdEstimate welch_psd(const Eigen::MatrixXd& series, double dt, int segments) {
  if (segments < 1) throw InvalidParameter("segments must be >= 1");
  const int n = static_cast<int>(series.rows());
  const int units = static_cast<int>(series.cols());
  const int seg = welch_segment_length(n, segments);
  if (seg < 8 || units < 1) {
    throw InsufficientData("need more samples for " + std::to_string(segments) + " Welch segments, have " +
                           std::to_string(n));
  }
  const int hop = std::max(1, seg / 2);
  const int bins = seg / 2 + 1;
  const auto window = hann_window(seg);
  double window_power = 0.0;
  for (double v : window) window_power += v * v;

  detail::FftwBuffer<double> in(static_cast<std::size_t>(seg) * units);
  detail::FftwBuffer<fftw_complex> out(static_cast<std::size_t>(bins) * units);
  detail::FftwPlan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    int dims[] = {seg};
    plan.plan = fftw_plan_many_dft_r2c(1, dims, units, in.data, nullptr, 1, seg, out.data, nullptr, 1, bins,
                                       FFTW_ESTIMATE);
  }
  if (!plan.plan) throw Error("FFTW planning failed");

  std::vector<double> acc(bins, 0.0);
  int count = 0;
  for (int start = 0; start + seg <= n; start += hop) {
    for (int u = 0; u < units; ++u) {
      const double* col = series.col(u).data() + start;
      double* dst = in.data + static_cast<std::size_t>(u) * seg;
      for (int k = 0; k < seg; ++k) dst[k] = col[k] * window[k];
    }
    fftw_execute(plan.plan);
    for (int u = 0; u < units; ++u) {
      const fftw_complex* f = out.data + static_cast<std::size_t>(u) * bins;
      for (int m = 0; m < bins; ++m) acc[m] += f[m][0] * f[m][0] + f[m][1] * f[m][1];
    }
    ++count;
  }

  PsdEstimate est;
  est.segment_length = seg;
  est.segment_count = count;
  est.series_count = units;
  est.omega.resize(bins);
  est.psd.resize(bins);
  const double scale = dt / (window_power * count * units);
  for (int m = 0; m < bins; ++m) {
    est.omega[m] = 2.0 * std::numbers::pi * m / (seg * dt);
    est.psd[m] = acc[m] * scale;
  }
  return est;
}

/// PSD of a recorded trajectory, averaged over all units.
inline PsdEstimate estimate_psd(const TrajectoryStats& stats, const DynamicsParams& params, int segments = 8) {
  if (stats.samples.size() == 0) throw InsufficientData("trajectory has no recorded samples");
  return welch_psd(stats.samples, params.dt, segments);
}

/// (1 / 2 pi) * integral of a two-sided density over [-pi/dt, pi/dt], from
/// its one-sided bins m = 0 .. seg/2 (Riemann sum on the DFT grid).
inline double psd_total_power(const PsdEstimate& est, double dt) {
  const int seg = est.segment_length;
  double total = 0.0;
  for (std::size_t m = 0; m < est.psd.size(); ++m) {
    const bool edge = m == 0 || (seg % 2 == 0 && static_cast<int>(m) == seg / 2);
    total += (edge ? 1.0 : 2.0) * est.psd[m];
  }
  return total / (seg * dt);
}

// ---------------------------------------------------------------------------
// Band metrics

namespace detail {

template <typename PointFn>
double band_mean(const std::vector<double>& sim, const std::vector<double>& theory, const std::vector<double>& grid,
                 double band_min, double band_max, PointFn&& point) {
  if (sim.size() != grid.size() || theory.size() != grid.size()) {
    throw DimensionMismatch("curves and grid differ in length");
  }
  double acc = 0.0;
  int m = 0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < band_min || grid[i] > band_max) continue;
    if (theory[i] == 0.0) throw ZeroTheory("theory vanishes at omega = " + std::to_string(grid[i]));
    acc += point(sim[i], theory[i]);
    ++m;
  }
  if (m < 3) throw EmptyBand("band [" + std::to_string(band_min) + ", " + std::to_string(band_max) + "] holds " +
                             std::to_string(m) + " grid points, need >= 3");
  return acc / m;
}

}  // namespace detail

/// Mean over band points of ((sim - theory) / theory)^2.
inline double relmse_band(const std::vector<double>& sim, const std::vector<double>& theory,
                          const std::vector<double>& grid, double band_min, double band_max) {
  return detail::band_mean(sim, theory, grid, band_min, band_max, [](double s, double t) {
    const double r = (s - t) / t;
    return r * r;
  });
}

/// Mean over band points of |sim - theory| / |theory|.
inline double band_mean_relative_deviation(const std::vector<double>& sim, const std::vector<double>& theory,
                                           const std::vector<double>& grid, double band_min, double band_max) {
  return detail::band_mean(sim, theory, grid, band_min, band_max,
                           [](double s, double t) { return std::abs((s - t) / t); });
}

}  // namespace marginal_evo
