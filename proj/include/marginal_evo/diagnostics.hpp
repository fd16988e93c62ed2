#pragma once

// Stability diagnostics: spectral-abscissa and two-replica Lyapunov
// estimates, and the mean-field amplification factor.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <Eigen/Dense>
#include <lapacke.h>

#include "marginal_evo/config.hpp"
#include "marginal_evo/dynamics.hpp"
#include "marginal_evo/ensembles.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/quadrature.hpp"

namespace marginal_evo {

enum class LyapunovMethod { SpectralAbscissa, TwoReplica };

/// Largest Lyapunov exponent in continuous-time units (1/depth).
struct LyapunovEstimate {
  double value = 0.0;
  LyapunovMethod method = LyapunovMethod::SpectralAbscissa;
  double std_error = 0.0;  ///< 0 for SpectralAbscissa
};

/// Eigenvalues of a general real square matrix (LAPACK dgeev: balancing,
/// Hessenberg reduction, Francis QR).
inline Eigen::VectorXcd eigenvalues(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw DimensionMismatch("eigenvalues of a non-square matrix");
  const lapack_int n = static_cast<lapack_int>(a.rows());
  Eigen::MatrixXd work = a;
  std::vector<double> re(n), im(n);
  const lapack_int info = LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'N', n, work.data(), n, re.data(), im.data(),
                                        nullptr, 1, nullptr, 1);
  if (info != 0) throw EigenFailure("dgeev failed, info = " + std::to_string(info));
  Eigen::VectorXcd out(n);
  for (lapack_int i = 0; i < n; ++i) out[i] = {re[i], im[i]};
  return out;
}

/// max Re(eig(a)).
inline double spectral_abscissa(const Eigen::MatrixXd& a) { return eigenvalues(a).real().maxCoeff(); }

/// lambda = max Re(eig(W)) - gamma, the growth rate of the drift W - gamma I.
inline LyapunovEstimate lyapunov_spectral(const DynamicsParams& params, const ConnectivityMatrix& w) {
  if (w.size() != params.n_units) throw DimensionMismatch("connectivity dimension differs from n_units");
  return {spectral_abscissa(w.entries) - params.gamma, LyapunovMethod::SpectralAbscissa, 0.0};
}

/// Two-replica indicator: mean per-step log growth divided by dt, with the
/// standard error of that mean.
inline LyapunovEstimate lyapunov_replica(const TrajectoryStats& stats, double dt) {
  const auto& g = stats.replica_log_growth;
  if (g.empty()) throw MissingData("trajectory has no replica log-growth record");
  if (!(dt > 0)) throw InvalidParameter("dt must be > 0");
  // Welford: a constant sequence gives its value and zero spread exactly
  double mean = 0.0, ss = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const double d = g[k] - mean;
    mean += d / static_cast<double>(k + 1);
    ss += d * (g[k] - mean);
  }
  const double count = static_cast<double>(g.size());
  const double sd = g.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  return {mean / dt, LyapunovMethod::TwoReplica, sd / (std::sqrt(count) * dt)};
}

// ---------------------------------------------------------------------------
// Mean field

enum class Activation { Linear, Tanh };

struct MeanFieldResult {
  double q_star = 0.0;
  double chi = 0.0;
  bool converged = false;
  int iterations = 0;
};

inline constexpr int kHermiteOrder = 64;
inline constexpr double kFixedPointDamping = 0.5;
inline constexpr int kFixedPointMaxIterations = 10000;

inline const GaussHermiteRule& standard_hermite_rule() {
  static const GaussHermiteRule rule = gauss_hermite_rule(kHermiteOrder);
  return rule;
}

/// Solves q = sigma_w2 E[phi(sqrt(q) Z)^2] by damped fixed-point iteration
/// and returns chi = sigma_w2 E[phi'(sqrt(q*) Z)^2]. When the iteration cap
/// is hit the last iterate is returned with converged = false.
inline MeanFieldResult meanfield_chi(double sigma_w2, Activation activation, double tolerance = 1e-12) {
  if (!(sigma_w2 >= 0) || !std::isfinite(sigma_w2)) throw InvalidParameter("sigma_w2 must be finite and >= 0");
  if (!(tolerance > 0)) throw InvalidParameter("tolerance must be > 0");

  if (activation == Activation::Linear) {
    // phi' = 1, so chi = sigma_w2; q = sigma_w2 q has the finite fixed point 0.
    return {0.0, sigma_w2, true, 0};
  }

  const auto& rule = standard_hermite_rule();
  const auto variance_map = [&](double q) {
    const double s = std::sqrt(q);
    return sigma_w2 * rule.expect([s](double z) {
      const double t = std::tanh(s * z);
      return t * t;
    });
  };

  // Start on the small-q branch q ~ (sigma_w2 - 1) / (2 sigma_w2); below 1 the
  // fixed point is q = 0 exactly.
  MeanFieldResult r;
  double q = sigma_w2 > 1.0 ? (sigma_w2 - 1.0) / (2.0 * sigma_w2) : 0.0;
  for (r.iterations = 0; r.iterations < kFixedPointMaxIterations; ++r.iterations) {
    const double f = variance_map(q);
    if (std::abs(q - f) < tolerance) {
      r.converged = true;
      break;
    }
    q = (1.0 - kFixedPointDamping) * q + kFixedPointDamping * f;
  }
  r.q_star = q;
  const double s = std::sqrt(q);
  r.chi = sigma_w2 * rule.expect([s](double z) {
    const double c = std::cosh(s * z);
    return 1.0 / (c * c * c * c);
  });
  return r;
}

/// sigma_w^2 at which chi = 1, by bisection on [0, 4]. Throws NonConvergence
/// if the root is not bracketed or chi is seen decreasing.
inline double critical_sigma(Activation activation, double tolerance = 1e-9) {
  if (!(tolerance > 0)) throw InvalidParameter("tolerance must be > 0");
  if (activation == Activation::Linear) return 1.0;

  const double inner_tol = std::min(tolerance, 1e-10);
  double lo = 0.0;
  double hi = 4.0;
  double chi_lo = meanfield_chi(lo, activation, inner_tol).chi;
  double chi_hi = meanfield_chi(hi, activation, inner_tol).chi;
  if (!(chi_lo < 1.0 && chi_hi > 1.0)) throw NonConvergence("chi = 1 not bracketed on [0, 4]");

  for (int it = 0; it < 200 && hi - lo > tolerance; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double chi_mid = meanfield_chi(mid, activation, inner_tol).chi;
    if (chi_mid < chi_lo - tolerance || chi_mid > chi_hi + tolerance) {
      throw NonConvergence("chi is not monotone in sigma_w2 near " + std::to_string(mid));
    }
    if (chi_mid < 1.0) {
      lo = mid;
      chi_lo = chi_mid;
    } else {
      hi = mid;
      chi_hi = chi_mid;
    }
  }
  if (hi - lo > tolerance) throw NonConvergence("bisection did not reach tolerance");
  return 0.5 * (lo + hi);
}

}  // namespace marginal_evo
