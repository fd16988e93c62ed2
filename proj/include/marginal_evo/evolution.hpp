#pragma once

// Fitness functional, Boltzmann selection, Gaussian mutation with projection,
// and the generational loop over scalar genotypes sigma_w^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "marginal_evo/config.hpp"
#include "marginal_evo/diagnostics.hpp"
#include "marginal_evo/dynamics.hpp"
#include "marginal_evo/ensembles.hpp"
#include "marginal_evo/errors.hpp"
#include "marginal_evo/parallel.hpp"
#include "marginal_evo/seed.hpp"
#include "marginal_evo/spectra.hpp"

namespace marginal_evo {

struct Genotype {
  double sigma_w2 = 0.0;
  bool operator==(const Genotype&) const = default;
};

/// Fitness value assigned to a genotype whose simulation overflowed (plus
/// lambda^2 so such genotypes stay rankable).
inline constexpr double kDivergencePenalty = 1e6;
/// Band points with omega^2 + gamma^2 - sigma_w^2 below this are dropped
/// from the spectral comparison.
inline constexpr double kPoleExclusion = 1e-6;

enum class PenaltyReason { None, Divergence, EmptyBand };

/// total = spec_term + lambda_term + crit_term + penalty, where
///   spec_term   = w_spec * relmse
///   lambda_term = w_lambda * lambda^2
///   crit_term   = w_crit * (sigma_w^2 - gamma^2)^2
/// When the spectrum is unavailable (penalty != 0) the three weighted terms
/// are replaced by kDivergencePenalty + lambda^2.
struct FitnessBreakdown {
  double spec_term = 0.0;
  double lambda_term = 0.0;
  double crit_term = 0.0;
  double penalty = 0.0;
  double total = 0.0;
  double lambda_value = 0.0;  ///< mean spectral abscissa over the sampled matrices
  double relmse = 0.0;
  PenaltyReason penalty_reason = PenaltyReason::None;
  int excluded_band_points = 0;

  bool operator==(const FitnessBreakdown&) const = default;
};

struct GenerationRecord {
  int generation = 0;
  std::vector<Genotype> genotypes;
  std::vector<FitnessBreakdown> fitness;
  double mean_sigma = 0.0;
  double std_sigma = 0.0;
  double best_sigma = 0.0;
  double mean_lambda = 0.0;
  double best_lambda = 0.0;
  double best_total = 0.0;
  double mean_total = 0.0;
  double best_relmse = 0.0;
  int n_penalized = 0;
  double beta = 0.0;
  double mut_std = 0.0;
  int best_index = 0;

  bool operator==(const GenerationRecord&) const = default;
};

struct EvaluateOptions {
  /// Replace every sampled matrix with W = 0 (diagnostic mode).
  bool zero_connectivity = false;
  unsigned threads = 1;
};

/// What one (matrix, trajectory) replica contributes to a fitness value.
struct ReplicaResult {
  double lambda = 0.0;
  std::optional<PsdEstimate> psd;  ///< empty when not simulated or diverged
  bool diverged = false;
};

namespace detail {

inline ConnectivityMatrix replica_matrix(double sigma_w2, const ExperimentConfig& cfg, std::uint64_t seed,
                                         bool zero_connectivity) {
  const std::uint64_t mseed = sub_seed(seed, Stream::Matrix);
  if (zero_connectivity) {
    const int n = cfg.dynamics.n_units;
    return {Eigen::MatrixXd::Zero(n, n), sigma_w2, cfg.variant.ensemble, mseed};
  }
  return sample_connectivity(cfg.variant, cfg.dynamics.n_units, sigma_w2, mseed);
}

inline void check_genotype(const Genotype& g, const EvolutionParams& evo) {
  if (!(g.sigma_w2 >= evo.clip_low && g.sigma_w2 <= evo.clip_high)) {
    throw ValidationError("Genotype.sigma_w2", "outside the admissible interval [" + std::to_string(evo.clip_low) +
                                                   ", " + std::to_string(evo.clip_high) + "]");
  }
}

}  // namespace detail

/// Samples, diagnoses and (if the spectral term is weighted) simulates one
/// replica of a genotype evaluation.
inline ReplicaResult evaluate_replica(const Genotype& g, const ExperimentConfig& cfg, int generation, int individual,
                                      int replica, const EvaluateOptions& opts = {}) {
  const std::uint64_t seed = derive_seed(cfg.master_seed, generation, individual, replica);
  const ConnectivityMatrix w = detail::replica_matrix(g.sigma_w2, cfg, seed, opts.zero_connectivity);
  ReplicaResult r;
  r.lambda = lyapunov_spectral(cfg.dynamics, w).value;
  if (cfg.fitness.w_spec > 0) {
    try {
      const auto traj = simulate(cfg.dynamics, w, sub_seed(seed, Stream::Noise), cfg.dynamics.burn_in);
      r.psd = estimate_psd(traj, cfg.dynamics, cfg.spectral.segments);
    } catch (const DivergenceError&) {
      r.diverged = true;
    }
  }
  return r;
}

/// Averages replica PSDs, compares with x_theory on the fitness band and
/// assembles the three-term fitness.
inline FitnessBreakdown assemble_fitness(const Genotype& g, const ExperimentConfig& cfg,
                                         std::span<const ReplicaResult> replicas) {
  const auto& dyn = cfg.dynamics;
  const auto& fw = cfg.fitness;
  FitnessBreakdown f;
  double lambda_sum = 0.0;
  bool diverged = false;
  for (const auto& r : replicas) {
    lambda_sum += r.lambda;
    diverged = diverged || r.diverged;
  }
  f.lambda_value = lambda_sum / static_cast<double>(replicas.size());

  const auto penalize = [&](PenaltyReason why) {
    f.penalty_reason = why;
    f.spec_term = 0.0;
    f.crit_term = 0.0;
    f.relmse = 0.0;
    f.lambda_term = f.lambda_value * f.lambda_value;
    f.penalty = kDivergencePenalty;
    f.total = f.penalty + f.lambda_term;
    return f;
  };
  if (diverged) return penalize(PenaltyReason::Divergence);

  if (fw.w_spec > 0) {
    const auto& first = *replicas.front().psd;
    std::vector<double> mean_psd(first.psd.size(), 0.0);
    for (const auto& r : replicas) {
      for (std::size_t m = 0; m < mean_psd.size(); ++m) mean_psd[m] += r.psd->psd[m];
    }
    for (double& v : mean_psd) v /= static_cast<double>(replicas.size());

    std::vector<double> grid, sim;
    for (std::size_t m = 0; m < first.omega.size(); ++m) {
      const double w = first.omega[m];
      if (w < fw.band_min || w > fw.band_max) continue;
      if (w * w + dyn.gamma * dyn.gamma - g.sigma_w2 < kPoleExclusion) {
        ++f.excluded_band_points;
        continue;
      }
      grid.push_back(w);
      sim.push_back(mean_psd[m]);
    }
    try {
      const auto theory = x_theory(grid, dyn, g.sigma_w2);
      f.relmse = relmse_band(sim, theory, grid, fw.band_min, fw.band_max);
    } catch (const EmptyBand&) {
      return penalize(PenaltyReason::EmptyBand);
    }
    f.spec_term = fw.w_spec * f.relmse;
  }
  f.lambda_term = fw.w_lambda * f.lambda_value * f.lambda_value;
  const double offset = g.sigma_w2 - dyn.gamma * dyn.gamma;
  f.crit_term = fw.w_crit * offset * offset;
  f.total = f.spec_term + f.lambda_term + f.crit_term;
  return f;
}

/// Fitness of one genotype: n_seeds replicas, each sampling a matrix from the
/// variant's ensemble, simulating it and estimating its PSD.
inline FitnessBreakdown evaluate(const Genotype& g, const ExperimentConfig& cfg, int generation, int individual,
                                 const EvaluateOptions& opts = {}) {
  validate(cfg);
  detail::check_genotype(g, cfg.evolution);
  std::vector<ReplicaResult> replicas(cfg.evolution.n_seeds);
  parallel_for(replicas.size(), opts.threads, [&](std::size_t r) {
    replicas[r] = evaluate_replica(g, cfg, generation, individual, static_cast<int>(r), opts);
  });
  return assemble_fitness(g, cfg, replicas);
}

/// Draws `count` parent indices with replacement, P(i) proportional to
/// exp(-beta (F_i - min F)).
inline std::vector<int> select(std::span<const double> fitness, double beta, std::uint64_t seed, int count) {
  if (fitness.empty()) throw InvalidInput("selection over an empty population");
  if (!(beta >= 0) || !std::isfinite(beta)) throw InvalidInput("beta must be finite and >= 0");
  if (count < 1) throw InvalidInput("selection count must be >= 1");
  for (double f : fitness) {
    if (!std::isfinite(f)) throw InvalidInput("non-finite fitness value");
  }
  const double best = *std::min_element(fitness.begin(), fitness.end());
  std::vector<double> weights(fitness.size());
  for (std::size_t i = 0; i < fitness.size(); ++i) weights[i] = std::exp(-beta * (fitness[i] - best));

  std::mt19937_64 rng(seed);
  std::discrete_distribution<int> pick(weights.begin(), weights.end());
  std::vector<int> out(count);
  for (int& i : out) i = pick(rng);
  return out;
}

/// child = clip(parent + N(0, (mut_std0 mut_decay^k)^2), clip_low, clip_high).
inline Genotype mutate(const Genotype& parent, int generation, const EvolutionParams& evo, std::uint64_t seed) {
  const double sd = evo.mutation_std(generation);
  double child = parent.sigma_w2;
  if (sd > 0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, sd);
    child += normal(rng);
  }
  return {std::clamp(child, evo.clip_low, evo.clip_high)};
}

/// Population statistics for one evaluated generation.
inline GenerationRecord summarize_generation(int generation, std::vector<Genotype> genotypes,
                                             std::vector<FitnessBreakdown> fitness, const EvolutionParams& evo) {
  GenerationRecord rec;
  rec.generation = generation;
  const double p = static_cast<double>(genotypes.size());
  double sum_s = 0.0, sum_l = 0.0, sum_f = 0.0;
  for (std::size_t i = 0; i < genotypes.size(); ++i) {
    sum_s += genotypes[i].sigma_w2;
    sum_l += fitness[i].lambda_value;
    sum_f += fitness[i].total;
    if (fitness[i].penalty_reason != PenaltyReason::None) ++rec.n_penalized;
    if (fitness[i].total < fitness[rec.best_index].total) rec.best_index = static_cast<int>(i);
  }
  rec.mean_sigma = sum_s / p;
  double ss = 0.0;
  for (const auto& g : genotypes) ss += (g.sigma_w2 - rec.mean_sigma) * (g.sigma_w2 - rec.mean_sigma);
  rec.std_sigma = std::sqrt(ss / p);
  rec.mean_lambda = sum_l / p;
  rec.mean_total = sum_f / p;
  const auto& best = fitness[rec.best_index];
  rec.best_sigma = genotypes[rec.best_index].sigma_w2;
  rec.best_lambda = best.lambda_value;
  rec.best_total = best.total;
  rec.best_relmse = best.relmse;
  rec.beta = evo.beta(generation);
  rec.mut_std = evo.mutation_std(generation);
  rec.genotypes = std::move(genotypes);
  rec.fitness = std::move(fitness);
  return rec;
}

using ProgressSink = std::function<void(const GenerationRecord&)>;

/// Generational evolution: P genotypes from U(init_low, init_high); each
/// generation is evaluated, recorded, then replaced by mutated children of
/// Boltzmann-selected parents at beta_k = beta0 beta_growth^k. Fully
/// determined by cfg.master_seed; the worker count does not affect results.
inline std::vector<GenerationRecord> run_evolution(const ExperimentConfig& cfg, const ProgressSink& progress = {},
                                                   unsigned threads = 1) {
  validate(cfg);
  const auto& evo = cfg.evolution;
  const int pop = evo.population;
  const int reps = evo.n_seeds;

  std::vector<Genotype> population(pop);
  for (int i = 0; i < pop; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.master_seed, 0, i, 0, Stream::Init));
    std::uniform_real_distribution<double> init(evo.init_low, evo.init_high);
    population[i] = {init(rng)};
  }

  std::vector<GenerationRecord> records;
  records.reserve(evo.generations);
  std::vector<ReplicaResult> results(static_cast<std::size_t>(pop) * reps);
  for (int k = 0; k < evo.generations; ++k) {
    parallel_for(results.size(), threads, [&](std::size_t task) {
      const int i = static_cast<int>(task / reps);
      const int r = static_cast<int>(task % reps);
      results[task] = evaluate_replica(population[i], cfg, k, i, r);
    });
    std::vector<FitnessBreakdown> fitness(pop);
    for (int i = 0; i < pop; ++i) {
      fitness[i] = assemble_fitness(population[i], cfg,
                                    std::span<const ReplicaResult>(results).subspan(static_cast<std::size_t>(i) * reps, reps));
    }
    records.push_back(summarize_generation(k, population, std::move(fitness), evo));
    const auto& rec = records.back();
    if (progress) progress(rec);
    if (k + 1 == evo.generations) break;

    std::vector<double> totals(pop);
    for (int i = 0; i < pop; ++i) totals[i] = rec.fitness[i].total;
    const auto parents = select(totals, rec.beta, derive_seed(cfg.master_seed, k, 0, 0, Stream::Select), pop);
    std::vector<Genotype> next(pop);
    for (int i = 0; i < pop; ++i) {
      next[i] = mutate(population[parents[i]], k, evo, derive_seed(cfg.master_seed, k, i, 0, Stream::Mutate));
    }
    if (evo.elitism) next[0] = population[rec.best_index];
    population = std::move(next);
  }
  return records;
}

/// Seed-averaged simulated PSD of one genotype next to its theoretical
/// curves on the Welch grid, omega = 0 included. Bins closer to the pole than
/// kPoleExclusion are left out.
inline SpectrumPair snapshot_spectrum(const Genotype& g, const ExperimentConfig& cfg, int n_seeds,
                                      unsigned threads = 1) {
  if (n_seeds < 1) throw InvalidParameter("n_seeds must be >= 1");
  validate(cfg.dynamics);
  validate(cfg.spectral);
  validate(cfg.variant);
  std::vector<PsdEstimate> psds(n_seeds);
  parallel_for(psds.size(), threads, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(cfg.master_seed, 0, 0, r, Stream::Snapshot);
    const auto w = sample_connectivity(cfg.variant, cfg.dynamics.n_units, g.sigma_w2, sub_seed(seed, Stream::Matrix));
    const auto traj = simulate(cfg.dynamics, w, sub_seed(seed, Stream::Noise), cfg.dynamics.burn_in);
    psds[r] = estimate_psd(traj, cfg.dynamics, cfg.spectral.segments);
  });

  const double gamma2 = cfg.dynamics.gamma * cfg.dynamics.gamma;
  std::vector<double> grid;
  std::vector<std::size_t> bins;
  for (std::size_t m = 0; m < psds.front().omega.size(); ++m) {
    const double w = psds.front().omega[m];
    if (w * w + gamma2 - g.sigma_w2 < kPoleExclusion) continue;
    grid.push_back(w);
    bins.push_back(m);
  }
  SpectrumPair pair = theory_curves(grid, cfg.dynamics, g.sigma_w2);
  pair.x_sim.assign(grid.size(), 0.0);
  for (const auto& p : psds) {
    for (std::size_t j = 0; j < bins.size(); ++j) pair.x_sim[j] += p.psd[bins[j]];
  }
  for (double& v : pair.x_sim) v /= n_seeds;
  pair.n_seeds_averaged = n_seeds;
  return pair;
}

}  // namespace marginal_evo
