#pragma once

// Random connectivity ensembles for the three model variants.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "marginal_evo/config.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/seed.hpp"

namespace marginal_evo {

/// An N x N coupling matrix together with the genotype and seed that
/// produced it.
struct ConnectivityMatrix {
  Eigen::MatrixXd entries;
  double genotype = 0.0;  ///< sigma_w^2
  Ensemble ensemble = Ensemble::Ginibre;
  std::uint64_t seed = 0;

  int size() const noexcept { return static_cast<int>(entries.rows()); }
};

namespace detail {

inline void check_ensemble_args(int n, double sigma_w2) {
  if (n < 2) throw InvalidParameter("matrix dimension must be >= 2, got " + std::to_string(n));
  if (!(sigma_w2 >= 0) || !std::isfinite(sigma_w2)) {
    throw InvalidParameter("sigma_w2 must be finite and >= 0");
  }
}

}  // namespace detail

/// E[cos^2 theta] for theta ~ N(0, s^2): (1 + exp(-2 s^2)) / 2.
inline double mean_cos_squared(double phase_std) {
  return 0.5 * (1.0 + std::exp(-2.0 * phase_std * phase_std));
}

/// Real Ginibre matrix: i.i.d. N(0, sigma_w2 / n) entries, drawn row by row.
inline ConnectivityMatrix sample_ginibre(int n, double sigma_w2, std::uint64_t seed) {
  detail::check_ensemble_args(n, sigma_w2);
  ConnectivityMatrix m{Eigen::MatrixXd(n, n), sigma_w2, Ensemble::Ginibre, seed};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(sigma_w2 / n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) m.entries(i, j) = normal(rng);
  }
  return m;
}

/// GOE-type matrix: off-diagonal N(0, sigma_w2 / n) mirrored across the
/// diagonal, diagonal N(0, 2 sigma_w2 / n). Exactly symmetric.
inline ConnectivityMatrix sample_real_symmetric(int n, double sigma_w2, std::uint64_t seed) {
  detail::check_ensemble_args(n, sigma_w2);
  ConnectivityMatrix m{Eigen::MatrixXd(n, n), sigma_w2, Ensemble::RealSymmetric, seed};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> off(0.0, std::sqrt(sigma_w2 / n));
  std::normal_distribution<double> diag(0.0, std::sqrt(2.0 * sigma_w2 / n));
  for (int i = 0; i < n; ++i) {
    m.entries(i, i) = diag(rng);
    for (int j = i + 1; j < n; ++j) {
      const double v = off(rng);
      m.entries(i, j) = v;
      m.entries(j, i) = v;
    }
  }
  return m;
}

/// Ginibre draw G modulated by local phases theta_ij ~ N(0, phase_std^2).
///
/// Modulus convention: W_ij = |G_ij| cos(theta_ij).
/// Signed convention:  W_ij =  G_ij  cos(theta_ij).
/// With `rescale`, entries are divided by sqrt(E[cos^2 theta]) so the second
/// moment stays sigma_w2 / n; otherwise it shrinks by E[cos^2 theta].
/// G uses the same stream as sample_ginibre(n, sigma_w2, seed).
inline ConnectivityMatrix sample_phased_ginibre(int n, double sigma_w2, double phase_std, std::uint64_t seed,
                                                PhaseConvention convention = PhaseConvention::Signed,
                                                bool rescale = false) {
  if (!(phase_std >= 0) || !std::isfinite(phase_std)) {
    throw InvalidParameter("phase_std must be finite and >= 0");
  }
  ConnectivityMatrix m = sample_ginibre(n, sigma_w2, seed);
  m.ensemble = Ensemble::PhasedGinibre;
  std::mt19937_64 rng(sub_seed(seed, Stream::Phase));
  std::normal_distribution<double> phase(0.0, phase_std > 0 ? phase_std : 1.0);
  const double scale = rescale ? 1.0 / std::sqrt(mean_cos_squared(phase_std)) : 1.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double theta = phase_std > 0 ? phase(rng) : 0.0;
      double& w = m.entries(i, j);
      const double magnitude = convention == PhaseConvention::Modulus ? std::abs(w) : w;
      w = magnitude * std::cos(theta) * scale;
    }
  }
  return m;
}

/// Draws from the ensemble a model variant prescribes.
inline ConnectivityMatrix sample_connectivity(const ModelVariant& variant, int n, double sigma_w2,
                                              std::uint64_t seed) {
  switch (variant.ensemble) {
    case Ensemble::Ginibre:
      return sample_ginibre(n, sigma_w2, seed);
    case Ensemble::RealSymmetric:
      return sample_real_symmetric(n, sigma_w2, seed);
    case Ensemble::PhasedGinibre:
      return sample_phased_ginibre(n, sigma_w2, variant.phase_std, seed, variant.phase_convention,
                                   variant.phase_rescale);
  }
  throw InvalidParameter("unknown ensemble");
}

/// Debug dump, row-major CSV. The first line is a '#' header:
///   # rows=<n> cols=<n> genotype=<sigma_w2> ensemble=<name> seed=<u64>
inline void dump_matrix_csv(const ConnectivityMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.precision(17);
  out << "# rows=" << m.entries.rows() << " cols=" << m.entries.cols() << " genotype=" << m.genotype
      << " ensemble=" << to_string(m.ensemble) << " seed=" << m.seed << "\n";
  for (Eigen::Index i = 0; i < m.entries.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.entries.cols(); ++j) {
      if (j) out << ',';
      out << m.entries(i, j);
    }
    out << '\n';
  }
  if (!out) throw IoError("write to '" + path + "' failed");
}

}  // namespace marginal_evo
