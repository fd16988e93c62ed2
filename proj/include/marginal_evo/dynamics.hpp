#pragma once

// Euler-Maruyama integration of the linear stochastic depth dynamics
//
//   h_{t+1} = h_t + dt (-gamma h_t + W h_t) + sqrt(2 kappa dt) eta_t,  h_0 = 0,
//
// and the two-replica separation experiment under shared noise.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "marginal_evo/config.hpp"
#include "marginal_evo/ensembles.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/seed.hpp"

namespace marginal_evo {

/// Any |h_i| above this aborts the run with DivergenceError.
inline constexpr double kOverflowGuard = 1e12;

struct TrajectoryStats {
  /// Recorded states, one row per step after burn-in, one column per unit.
  /// Column-major, so each unit's time series is contiguous.
  Eigen::MatrixXd samples;
  int burn_in = 0;
  double dt = 0.0;
  /// Per-step log(|dh_{l+1}| / |dh_l|); empty unless produced by
  /// simulate_two_replica.
  std::vector<double> replica_log_growth;
};

/// One-step propagator I + dt (W - gamma I).
inline Eigen::MatrixXd euler_propagator(const DynamicsParams& params, const ConnectivityMatrix& w) {
  if (w.size() != params.n_units) {
    throw DimensionMismatch("connectivity is " + std::to_string(w.size()) + "x" + std::to_string(w.size()) +
                            " but n_units = " + std::to_string(params.n_units));
  }
  Eigen::MatrixXd m = params.dt * w.entries;
  m.diagonal().array() += 1.0 - params.dt * params.gamma;
  return m;
}

namespace detail {

inline void check_state(const Eigen::VectorXd& h, long step) {
  const double peak = h.cwiseAbs().maxCoeff();
  if (!(peak <= kOverflowGuard)) {
    throw DivergenceError(step, "state magnitude " + std::to_string(peak) + " exceeds overflow guard");
  }
}

inline void fill_normal(Eigen::VectorXd& v, std::mt19937_64& rng, std::normal_distribution<double>& normal) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = normal(rng);
}

}  // namespace detail

/// Integrates params.n_steps Euler-Maruyama steps from h_0 = 0 and records
/// h_{t+1} for every t >= burn_in. Deterministic given `seed`.
inline TrajectoryStats simulate(const DynamicsParams& params, const ConnectivityMatrix& w, std::uint64_t seed,
                                int burn_in) {
  if (burn_in < 0 || burn_in >= params.n_steps) {
    throw InvalidParameter("burn_in must lie in [0, n_steps)");
  }
  const Eigen::MatrixXd prop = euler_propagator(params, w);
  const int n = params.n_units;
  const double noise_scale = std::sqrt(2.0 * params.kappa * params.dt);

  TrajectoryStats out;
  out.burn_in = burn_in;
  out.dt = params.dt;
  out.samples.resize(params.n_steps - burn_in, n);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd eta(n);
  Eigen::VectorXd next(n);
  for (int t = 0; t < params.n_steps; ++t) {
    detail::fill_normal(eta, rng, normal);
    next.noalias() = prop * h;
    next += noise_scale * eta;
    h.swap(next);
    detail::check_state(h, t + 1);
    if (t >= burn_in) out.samples.row(t - burn_in) = h.transpose();
  }
  return out;
}

/// Unit vector u along which simulate_two_replica displaces the second copy.
inline Eigen::VectorXd replica_direction(int n, std::uint64_t seed) {
  std::mt19937_64 rng(sub_seed(seed, Stream::Replica));
  std::normal_distribution<double> normal;
  Eigen::VectorXd u(n);
  detail::fill_normal(u, rng, normal);
  return u / u.norm();
}

/// Runs two copies of the dynamics driven by the same noise stream, the
/// second started at h_0 + delta0 * u for a random unit vector u.
///
/// The second copy is carried as an offset from the first, dh = h' - h, which
/// obeys dh_{t+1} = (I + dt (W - gamma I)) dh_t exactly because the shared
/// noise cancels. After each step dh is rescaled back to norm delta0;
/// log(|dh_{t+1}| / |dh_t|) is recorded for steps t >= params.burn_in, so the
/// alignment transient of the random start direction is discarded. `samples`
/// is left empty.
inline TrajectoryStats simulate_two_replica(const DynamicsParams& params, const ConnectivityMatrix& w,
                                            std::uint64_t seed, double delta0 = 1e-8) {
  if (!(delta0 > 0) || !std::isfinite(delta0)) throw InvalidParameter("delta0 must be finite and > 0");
  const Eigen::MatrixXd prop = euler_propagator(params, w);
  const int n = params.n_units;
  const double noise_scale = std::sqrt(2.0 * params.kappa * params.dt);

  TrajectoryStats out;
  out.dt = params.dt;
  out.burn_in = params.burn_in;
  out.replica_log_growth.reserve(params.n_steps - params.burn_in);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;

  Eigen::VectorXd offset = delta0 * replica_direction(n, seed);

  Eigen::VectorXd h = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd eta(n);
  Eigen::VectorXd next(n);
  Eigen::VectorXd next_offset(n);
  for (int t = 0; t < params.n_steps; ++t) {
    detail::fill_normal(eta, rng, normal);
    next.noalias() = prop * h;
    next += noise_scale * eta;
    h.swap(next);
    detail::check_state(h, t + 1);

    next_offset.noalias() = prop * offset;
    const double before = offset.norm();
    const double after = next_offset.norm();
    if (!(after > 0) || !std::isfinite(after)) {
      throw DivergenceError(t + 1, "replica separation collapsed or overflowed");
    }
    if (t >= params.burn_in) out.replica_log_growth.push_back(std::log(after / before));
    offset = next_offset * (delta0 / after);
  }
  return out;
}

/// Debug dump: one "step,unit,value" row per recorded sample.
inline void dump_trajectory_csv(const TrajectoryStats& stats, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "step,unit,value\n";
  for (Eigen::Index r = 0; r < stats.samples.rows(); ++r) {
    for (Eigen::Index u = 0; u < stats.samples.cols(); ++u) {
      out << stats.burn_in + r + 1 << ',' << u << ',' << stats.samples(r, u) << '\n';
    }
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace marginal_evo
